use std::collections::BTreeMap;

use crate::cohort::AdmissionRecord;
use crate::error::{Error, Result};

/// Collapses each patient's admissions to one: readings within an admission
/// are averaged; heart-failure patients keep their earliest admission carrying
/// an `I50*` code, controls the admission with the most features present
/// (earliest on ties). Output is ordered by patient id.
pub fn aggregate_and_select(records: &[AdmissionRecord], features: &[String]) -> Result<Vec<AdmissionRecord>> {
    let mut by_patient: BTreeMap<&str, Vec<&AdmissionRecord>> = BTreeMap::new();
    for r in records {
        by_patient.entry(r.patient_id.as_str()).or_default().push(r);
    }
    let mut out = Vec::with_capacity(by_patient.len());
    for (pid, mut adms) in by_patient {
        adms.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| a.admission_id.cmp(&b.admission_id))
        });
        let label = adms[0].label;
        if adms.iter().any(|a| a.label != label) {
            return Err(Error::Data(format!(
                "patient {pid} has admissions with different labels"
            )));
        }
        let chosen = if label == 1 {
            *adms
                .iter()
                .find(|a| a.has_heart_failure_code())
                .ok_or_else(|| Error::Data(format!("heart-failure patient {pid} has no I50* admission")))?
        } else {
            let mut best = adms[0];
            for a in &adms[1..] {
                if a.present_count(features) > best.present_count(features) {
                    best = a;
                }
            }
            best
        };
        let mut rec = chosen.clone();
        for (name, readings) in rec.measurements.iter_mut() {
            if let Some(mean) = chosen.mean(name) {
                *readings = vec![mean];
            }
        }
        out.push(rec);
    }
    Ok(out)
}
