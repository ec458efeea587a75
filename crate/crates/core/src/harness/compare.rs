use std::fmt;
use std::io::Write;

use super::{fmt_pct, AggregateRow, SweepReport};
use crate::error::{Error, Result};

/// `hit_ratio(a) / hit_ratio(b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Multiplier {
    Value(f64),
    /// Baseline 0, numerator positive.
    Infinite,
    /// Both 0.
    Undefined,
}

impl Multiplier {
    pub fn of(num: f64, den: f64) -> Self {
        if den > 0.0 {
            Multiplier::Value(num / den)
        } else if num > 0.0 {
            Multiplier::Infinite
        } else {
            Multiplier::Undefined
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Multiplier::Value(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Multiplier::Value(v) => write!(f, "{v}"),
            Multiplier::Infinite => f.write_str("inf"),
            Multiplier::Undefined => f.write_str("undefined"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityComparison {
    pub capacity_index: usize,
    pub capacity_pct: Option<f64>,
    pub capacity_bytes: (u64, u64),
    pub best_policy: String,
    /// `(policy, mean hit ratio, best − mean)` in configuration order.
    pub gaps: Vec<(String, f64, f64)>,
    /// `(lfru-family policy, baseline, multiplier)`.
    pub multipliers: Vec<(String, String, Multiplier)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyComparison {
    pub rows: Vec<CapacityComparison>,
    pub config_hash: String,
}

fn is_follow_policy(name: &str) -> bool {
    name.starts_with("lfru")
}

/// Compares seed-averaged hit ratios per capacity: the best policy, every
/// policy's gap to it, and each LFRU-family policy's multiplier over LRU
/// and LFU when those are present.
pub fn compare_policies(report: &SweepReport) -> Result<PolicyComparison> {
    let policies = report.policies();
    if policies.len() < 2 {
        return Err(Error::config("comparison needs at least two policies"));
    }
    let agg = report.aggregate();
    let mut caps: Vec<usize> = agg.iter().map(|a| a.capacity_index).collect();
    caps.sort_unstable();
    caps.dedup();
    let rows = caps
        .into_iter()
        .map(|c| {
            let cell: Vec<&AggregateRow> = policies
                .iter()
                .filter_map(|p| agg.iter().find(|a| a.capacity_index == c && a.policy == *p))
                .collect();
            let best = cell
                .iter()
                .fold(None::<&AggregateRow>, |b, a| match b {
                    Some(b) if b.mean >= a.mean => Some(b),
                    _ => Some(a),
                })
                .expect("a capacity has at least one aggregate row");
            let mean_of = |p: &str| cell.iter().find(|a| a.policy == p).map(|a| a.mean);
            let mut multipliers = Vec::new();
            for a in cell.iter().filter(|a| is_follow_policy(&a.policy)) {
                for base in ["lru", "lfu"] {
                    if let Some(m) = mean_of(base) {
                        multipliers.push((a.policy.clone(), base.to_string(), Multiplier::of(a.mean, m)));
                    }
                }
            }
            CapacityComparison {
                capacity_index: c,
                capacity_pct: best.capacity_pct,
                capacity_bytes: (
                    cell.iter().map(|a| a.capacity_bytes.0).min().unwrap_or(0),
                    cell.iter().map(|a| a.capacity_bytes.1).max().unwrap_or(0),
                ),
                best_policy: best.policy.clone(),
                gaps: cell.iter().map(|a| (a.policy.clone(), a.mean, best.mean - a.mean)).collect(),
                multipliers,
            }
        })
        .collect();
    Ok(PolicyComparison {
        rows,
        config_hash: report.config_hash.clone(),
    })
}

impl PolicyComparison {
    /// Largest finite multiplier of `policy` over `baseline` across capacities.
    pub fn max_multiplier(&self, policy: &str, baseline: &str) -> Option<f64> {
        self.rows
            .iter()
            .flat_map(|r| &r.multipliers)
            .filter(|(p, b, _)| p == policy && b == baseline)
            .filter_map(|(_, _, m)| m.value())
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    /// Columns `capacity_pct,capacity_bytes_min,capacity_bytes_max,policy,mean_hit_ratio,gap_to_best,best_policy`.
    pub fn write_gaps_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "# corrcache compare-gaps config_hash={}", self.config_hash)?;
        writeln!(
            out,
            "capacity_pct,capacity_bytes_min,capacity_bytes_max,policy,mean_hit_ratio,gap_to_best,best_policy"
        )?;
        for r in &self.rows {
            for (p, mean, gap) in &r.gaps {
                writeln!(
                    out,
                    "{},{},{},{p},{mean},{gap},{}",
                    fmt_pct(r.capacity_pct),
                    r.capacity_bytes.0,
                    r.capacity_bytes.1,
                    r.best_policy
                )?;
            }
        }
        Ok(())
    }

    /// Columns `capacity_pct,capacity_bytes_min,capacity_bytes_max,policy,baseline,multiplier`.
    pub fn write_multipliers_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "# corrcache compare-multipliers config_hash={}", self.config_hash)?;
        writeln!(out, "capacity_pct,capacity_bytes_min,capacity_bytes_max,policy,baseline,multiplier")?;
        for r in &self.rows {
            for (p, b, m) in &r.multipliers {
                writeln!(
                    out,
                    "{},{},{},{p},{b},{m}",
                    fmt_pct(r.capacity_pct),
                    r.capacity_bytes.0,
                    r.capacity_bytes.1
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::SweepRow;

    fn row(policy: &str, cap: usize, seed: u64, hits: u64) -> SweepRow {
        SweepRow {
            policy: policy.into(),
            capacity_index: cap,
            capacity_pct: None,
            capacity_bytes: 10 * (cap as u64 + 1),
            seed,
            requests: 100,
            hits,
            hit_ratio: Some(hits as f64 / 100.0),
            clients: vec![],
        }
    }

    fn report(rows: Vec<SweepRow>) -> SweepReport {
        SweepReport {
            rows,
            config_hash: "x".into(),
            version: "0".into(),
        }
    }

    #[test]
    fn equal_ratios_give_one() {
        let r = report(vec![row("lru", 0, 1, 30), row("lfru:20", 0, 1, 30)]);
        let c = compare_policies(&r).unwrap();
        assert_eq!(c.rows[0].multipliers, vec![("lfru:20".into(), "lru".into(), Multiplier::Value(1.0))]);
    }

    #[test]
    fn zero_baselines_are_not_numbers() {
        assert_eq!(Multiplier::of(0.2, 0.0), Multiplier::Infinite);
        assert_eq!(Multiplier::of(0.0, 0.0), Multiplier::Undefined);
        assert_eq!(Multiplier::Infinite.to_string(), "inf");
        let r = report(vec![row("lru", 0, 1, 0), row("lfru:20", 0, 1, 5), row("lfu", 0, 1, 0)]);
        let c = compare_policies(&r).unwrap();
        assert_eq!(c.rows[0].multipliers[0].2, Multiplier::Infinite);
        assert_eq!(c.max_multiplier("lfru:20", "lru"), None);
    }

    #[test]
    fn best_and_gaps_use_seed_means() {
        let r = report(vec![
            row("lru", 0, 1, 10),
            row("lru", 0, 2, 30),
            row("lfu", 0, 1, 25),
            row("lfu", 0, 2, 25),
            row("lru", 1, 1, 50),
            row("lfu", 1, 1, 40),
        ]);
        let c = compare_policies(&r).unwrap();
        assert_eq!(c.rows[0].best_policy, "lfu");
        assert!((c.rows[0].gaps[0].2 - 0.05).abs() < 1e-12);
        assert_eq!(c.rows[1].best_policy, "lru");
    }

    #[test]
    fn single_policy_is_rejected() {
        assert!(compare_policies(&report(vec![row("lru", 0, 1, 1)])).is_err());
    }
}
