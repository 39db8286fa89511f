//! CSV and JSON views of simulated waveforms.

use serde::Serialize;

use super::solver::Waveforms;

/// Waveforms as CSV: `t_ns`, node voltages, per-cell IVD and charges,
/// end-of-line current and the energy traces.
pub fn waveforms_csv(w: &Waveforms) -> Result<String, csv::Error> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["t_ns".to_string()];
    header.extend(w.node_names.iter().map(|n| format!("v_{n}")));
    for c in &w.cell_labels {
        header.push(format!("ivd_{c}"));
        header.push(format!("Q_{c}"));
        header.push(format!("q_{c}"));
    }
    header.extend(
        ["i_end_ua", "e_cell_fj", "e_periphery_fj", "e_vsa_fj", "e_total_fj"]
            .iter()
            .map(|s| s.to_string()),
    );
    out.write_record(&header)?;
    for k in 0..w.time_ns.len() {
        let mut row = vec![fmt_sci(w.time_ns[k])];
        row.extend(w.node_voltages.iter().map(|s| fmt_sci(s[k])));
        for c in 0..w.cell_labels.len() {
            row.push(fmt_sci(w.cell_ivd[c][k]));
            row.push(fmt_sci(w.cell_q[c][k]));
            row.push(fmt_sci(w.cell_plate_q[c][k]));
        }
        row.push(fmt_sci(w.end_current_ua[k]));
        row.push(fmt_sci(w.cell_energy_fj[k]));
        row.push(fmt_sci(w.periphery_energy_fj[k]));
        row.push(fmt_sci(w.vsa_energy_fj[k]));
        row.push(fmt_sci(w.total_energy_fj[k]));
        out.write_record(&row)?;
    }
    let bytes = out.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Shortest round-trip representation; never locale dependent.
pub fn fmt_sci(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveformSummary {
    pub peak_end_current_ua: f64,
    pub final_ivd_v: Vec<f64>,
    pub cell_energy_fj: f64,
    pub periphery_energy_fj: f64,
    pub total_energy_fj: f64,
    pub max_kcl_residual_a: f64,
    pub vsa_activated: Option<bool>,
    pub vsa_peak_v: Option<f64>,
}

impl From<&Waveforms> for WaveformSummary {
    fn from(w: &Waveforms) -> Self {
        Self {
            peak_end_current_ua: w.peak_abs_current_ua(),
            final_ivd_v: w.final_ivd(),
            cell_energy_fj: w.final_cell_energy_fj(),
            periphery_energy_fj: w.final_periphery_energy_fj(),
            total_energy_fj: w.final_total_energy_fj(),
            max_kcl_residual_a: w.max_kcl_residual_a,
            vsa_activated: w.vsa_activated,
            vsa_peak_v: w.vsa_peak_v,
        }
    }
}
