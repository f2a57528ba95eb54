//! Writers for verdict and estimation reports.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::model::FcsVerdict;

pub const SUMMARY_COLUMNS: [&str; 6] = [
    "fcs_id",
    "gamma_pct",
    "sigma_pct",
    "p_acceptable_pct",
    "classification",
    "provenance",
];

/// Pretty JSON followed by a newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut writer: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer
        .write_all(b"\n")
        .map_err(|e| crate::Error::io("<json output>", e))?;
    Ok(())
}

/// One row per verdict, percentages with one decimal.
pub fn write_summary_csv<W: Write>(writer: W, verdicts: &[FcsVerdict]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_COLUMNS)?;
    for v in verdicts {
        w.write_record([
            v.fcs_id.clone(),
            format!("{:.1}", v.gamma * 100.0),
            format!("{:.1}", v.sigma_gamma * 100.0),
            format!("{:.1}", v.p_acceptable),
            v.classification.to_string(),
            v.provenance.to_string(),
        ])?;
    }
    w.flush().map_err(|e| crate::Error::io("<csv output>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Classification, Provenance};

    #[test]
    fn summary_format() {
        let v = FcsVerdict {
            fcs_id: "F1".into(),
            gamma: -0.017,
            sigma_gamma: 0.011,
            interval: [-0.028, -0.006],
            p_acceptable: 63.6,
            classification: Classification::Acceptable,
            provenance: Provenance::Chain {
                paths: vec![vec!["R".into(), "F1".into()]],
            },
        };
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &[v]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "fcs_id,gamma_pct,sigma_pct,p_acceptable_pct,classification,provenance\n\
             F1,-1.7,1.1,63.6,Acceptable,chain:R>F1\n"
        );
    }
}
