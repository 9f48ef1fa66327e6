//! Theory-vs-simulation comparison tables.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::curve::{steady_state_estimate, LearningCurve};
use super::HarnessError;
use crate::theory::SteadyStateMode;

/// Steady-state prediction for one rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateRow {
    pub rule: String,
    pub mode: SteadyStateMode,
    pub mu_ss: f64,
    pub msd_db: f64,
    pub emse_db: f64,
    /// Spectral radius of `F_ss`.
    pub radius: f64,
    pub closed_form_mu: f64,
    /// `None` when the closed-form step-size is mean-square unstable.
    pub closed_form_msd_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub rule: String,
    pub theory_ss_db: f64,
    pub sim_ss_db: f64,
    /// `theory_ss_db − sim_ss_db`.
    pub difference_db: f64,
    /// Largest `|theory − simulation|` in dB after the skipped iterations.
    pub transient_max_dev_db: Option<f64>,
    pub closed_form_db: Option<f64>,
    pub mu_ss: f64,
    pub tolerance_db: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSettings {
    pub tail_fraction: f64,
    /// Points with `iter <= transient_skip` are left out of the transient
    /// deviation.
    pub transient_skip: usize,
    pub tolerance_db: f64,
    pub rule_tolerance_db: BTreeMap<String, f64>,
    pub rule_tail_fraction: BTreeMap<String, f64>,
}

impl ReportSettings {
    pub fn tolerance_for(&self, rule: &str) -> f64 {
        self.rule_tolerance_db
            .get(rule)
            .copied()
            .unwrap_or(self.tolerance_db)
    }

    pub fn tail_fraction_for(&self, rule: &str) -> f64 {
        self.rule_tail_fraction
            .get(rule)
            .copied()
            .unwrap_or(self.tail_fraction)
    }
}

/// Tabulates steady-state theory against the tail average of each simulated
/// curve. `theory` curves, when given, must cover the same rules and be
/// sampled at the same iterations as `sim`.
pub fn compare_report(
    steady: &[SteadyStateRow],
    theory: &[LearningCurve],
    sim: &[LearningCurve],
    settings: &ReportSettings,
) -> Result<ComparisonReport, HarnessError> {
    let names = |it: &mut dyn Iterator<Item = &str>| {
        let mut v: Vec<String> = it.map(str::to_string).collect();
        v.sort();
        v
    };
    let sim_names = names(&mut sim.iter().map(|c| c.rule.as_str()));
    let steady_names = names(&mut steady.iter().map(|r| r.rule.as_str()));
    if sim_names != steady_names {
        return Err(HarnessError::MismatchedRules(format!(
            "theory {steady_names:?} vs simulation {sim_names:?}"
        )));
    }
    if !theory.is_empty() {
        let theory_names = names(&mut theory.iter().map(|c| c.rule.as_str()));
        if theory_names != sim_names {
            return Err(HarnessError::MismatchedRules(format!(
                "theory curves {theory_names:?} vs simulation {sim_names:?}"
            )));
        }
    }

    let mut rows = Vec::with_capacity(steady.len());
    for st in steady {
        let s = sim.iter().find(|c| c.rule == st.rule).expect("checked above");
        let sim_ss_db = steady_state_estimate(s, settings.tail_fraction_for(&st.rule))?;
        let transient_max_dev_db = match theory.iter().find(|c| c.rule == st.rule) {
            Some(t) => Some(transient_max_deviation(t, s, settings.transient_skip)?),
            None => None,
        };
        let difference_db = st.msd_db - sim_ss_db;
        let tolerance_db = settings.tolerance_for(&st.rule);
        rows.push(ComparisonRow {
            rule: st.rule.clone(),
            theory_ss_db: st.msd_db,
            sim_ss_db,
            difference_db,
            transient_max_dev_db,
            closed_form_db: st.closed_form_msd_db,
            mu_ss: st.mu_ss,
            tolerance_db,
            pass: difference_db.abs() <= tolerance_db,
        });
    }
    Ok(ComparisonReport { rows })
}

/// `max |theory_db − sim_db|` over points with `iter > skip`.
pub fn transient_max_deviation(
    theory: &LearningCurve,
    sim: &LearningCurve,
    skip: usize,
) -> Result<f64, HarnessError> {
    if theory.iter != sim.iter {
        return Err(HarnessError::MismatchedRules(format!(
            "rule {}: theory and simulation are sampled at different iterations",
            theory.rule
        )));
    }
    let mut worst = 0.0f64;
    for k in 0..theory.len() {
        if theory.iter[k] > skip {
            let d = (theory.msd_db[k] - sim.msd_db[k]).abs();
            if d.is_nan() {
                return Err(HarnessError::CurveDiverged(theory.iter[k]));
            }
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl ComparisonReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "rule",
            "theory_ss_db",
            "sim_ss_db",
            "difference_db",
            "transient_max_dev_db",
            "closed_form_db",
            "mu_ss",
            "tolerance_db",
            "status",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.rule.clone(),
                r.theory_ss_db.to_string(),
                r.sim_ss_db.to_string(),
                r.difference_db.to_string(),
                opt(r.transient_max_dev_db),
                opt(r.closed_form_db),
                r.mu_ss.to_string(),
                r.tolerance_db.to_string(),
                if r.pass { "PASS" } else { "FAIL" }.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<8} {:>11} {:>11} {:>9} {:>10} {:>11} {:>6}\n",
            "rule", "theory_dB", "sim_dB", "diff_dB", "trans_dB", "closed_dB", "status"
        );
        for r in &self.rows {
            let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.2}"));
            s += &format!(
                "{:<8} {:>11.2} {:>11.2} {:>9.3} {:>10} {:>11} {:>6}\n",
                r.rule,
                r.theory_ss_db,
                r.sim_ss_db,
                r.difference_db,
                f(r.transient_max_dev_db),
                f(r.closed_form_db),
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
        s
    }
}

/// CSV table of steady-state predictions.
pub fn write_steady_csv<W: Write>(rows: &[SteadyStateRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "rule",
        "mode",
        "mu_ss",
        "msd_db",
        "emse_db",
        "radius",
        "closed_form_mu",
        "closed_form_msd_db",
    ])?;
    for r in rows {
        let mode = match r.mode {
            SteadyStateMode::ClosedForm => "closed_form",
            SteadyStateMode::FixedPoint => "fixed_point",
        };
        w.write_record([
            r.rule.clone(),
            mode.to_string(),
            r.mu_ss.to_string(),
            r.msd_db.to_string(),
            r.emse_db.to_string(),
            r.radius.to_string(),
            r.closed_form_mu.to_string(),
            opt(r.closed_form_msd_db),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::curve::CurveSource;

    fn curve(rule: &str, source: CurveSource, msd: f64) -> LearningCurve {
        LearningCurve::from_linear(rule, source, (0..100).collect(), &[msd; 100], &[msd; 100], vec![0.0; 100])
    }

    fn steady(rule: &str, msd_db: f64) -> SteadyStateRow {
        SteadyStateRow {
            rule: rule.into(),
            mode: SteadyStateMode::ClosedForm,
            mu_ss: 0.01,
            msd_db,
            emse_db: msd_db,
            radius: 0.9,
            closed_form_mu: 0.01,
            closed_form_msd_db: Some(msd_db),
        }
    }

    fn settings() -> ReportSettings {
        ReportSettings {
            tail_fraction: 0.1,
            transient_skip: 50,
            tolerance_db: 0.3,
            rule_tolerance_db: BTreeMap::new(),
            rule_tail_fraction: BTreeMap::new(),
        }
    }

    #[test]
    fn identical_theory_and_simulation() {
        let st = [steady("KJ", -40.0)];
        let th = [curve("KJ", CurveSource::Theory, 1e-4)];
        let sim = [curve("KJ", CurveSource::Simulation, 1e-4)];
        let r = compare_report(&st, &th, &sim, &settings()).unwrap();
        assert!(r.rows[0].difference_db.abs() < 1e-12);
        assert_eq!(r.rows[0].transient_max_dev_db, Some(0.0));
        assert!(r.all_pass());
    }

    #[test]
    fn difference_is_theory_minus_simulation() {
        let st = [steady("KJ", -40.0)];
        let sim = [curve("KJ", CurveSource::Simulation, 1e-3)];
        let mut s = settings();
        let r = compare_report(&st, &[], &sim, &s).unwrap();
        let row = &r.rows[0];
        assert_eq!(row.difference_db, row.theory_ss_db - row.sim_ss_db);
        assert!(!row.pass);
        s.rule_tolerance_db.insert("KJ".into(), 10.5);
        assert!(compare_report(&st, &[], &sim, &s).unwrap().rows[0].pass);
    }

    #[test]
    fn mismatched_rules_rejected() {
        let st = [steady("KJ", -40.0)];
        let sim = [curve("Sp", CurveSource::Simulation, 1e-4)];
        assert!(matches!(
            compare_report(&st, &[], &sim, &settings()),
            Err(HarnessError::MismatchedRules(_))
        ));
    }

    #[test]
    fn transient_skip_is_respected() {
        let th = curve("KJ", CurveSource::Theory, 1e-4);
        let mut sim = curve("KJ", CurveSource::Simulation, 1e-4);
        sim.msd_db[50] += 5.0;
        sim.msd_db[60] += 0.5;
        let d = transient_max_deviation(&th, &sim, 50).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn csv_status_is_recomputable() {
        let st = [steady("KJ", -40.0), steady("Sp", -30.0)];
        let sim = [
            curve("KJ", CurveSource::Simulation, 1e-4),
            curve("Sp", CurveSource::Simulation, 1e-2),
        ];
        let r = compare_report(&st, &[], &sim, &settings()).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let mut rd = csv::Reader::from_reader(buf.as_slice());
        for rec in rd.records() {
            let rec = rec.unwrap();
            let diff: f64 = rec[3].parse().unwrap();
            let tol: f64 = rec[7].parse().unwrap();
            let theory: f64 = rec[1].parse().unwrap();
            let sim: f64 = rec[2].parse().unwrap();
            assert_eq!(diff, theory - sim);
            assert_eq!(&rec[8], if diff.abs() <= tol { "PASS" } else { "FAIL" });
        }
    }
}
