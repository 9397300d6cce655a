//! Seeded synthetic databases with a planted label rule.

use chrono::{Duration, NaiveDate};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rdb::{CellValue, ColumnKind, ColumnSpec, Database, Table};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Flat,
    ParentChild,
    ThreeLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    /// Label thresholds `Parent.score`.
    SingleTable,
    /// Label thresholds the sum of `Child.amount` over a parent's children.
    ChildAggregate,
    /// Label thresholds the sum of `Grandchild.amount` over a parent's grandchildren.
    GrandchildAggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_targets: usize,
    pub template: Template,
    pub signal: Signal,
    pub noise: f64,
    /// Inclusive range of children per parent (and grandchildren per child).
    pub children: (usize, usize),
}

impl SynthSpec {
    pub fn new(template: Template, signal: Signal, n_targets: usize, seed: u64) -> SynthSpec {
        SynthSpec { seed, n_targets, template, signal, noise: 0.0, children: (1, 6) }
    }

    pub fn with_noise(mut self, noise: f64) -> SynthSpec {
        self.noise = noise;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let depth = match self.template {
            Template::Flat => 0,
            Template::ParentChild => 1,
            Template::ThreeLevel => 2,
        };
        let needed = match self.signal {
            Signal::SingleTable => 0,
            Signal::ChildAggregate => 1,
            Signal::GrandchildAggregate => 2,
        };
        if needed > depth {
            return Err(SynthError::SignalNeedsDepth { signal: self.signal, template: self.template });
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(SynthError::Noise(self.noise));
        }
        if self.children.0 > self.children.1 {
            return Err(SynthError::Children(self.children.0, self.children.1));
        }
        if self.n_targets < 2 {
            return Err(SynthError::TooFewTargets(self.n_targets));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("signal {signal:?} is not expressible in template {template:?}")]
    SignalNeedsDepth { signal: Signal, template: Template },
    #[error("noise rate {0} outside [0, 1)")]
    Noise(f64),
    #[error("children range {0}..={1} is empty")]
    Children(usize, usize),
    #[error("need at least 2 targets, got {0}")]
    TooFewTargets(usize),
}

const WORDS: [&str; 12] = ["alpha", "bravo", "delta", "echo", "golf", "kilo", "lima", "mike", "oscar", "romeo", "tango", "zulu"];

fn key(prefix: &str, i: usize) -> CellValue {
    CellValue::Key(format!("{prefix}{i}"))
}

fn pick(rng: &mut ChaCha8Rng, options: &[&str]) -> CellValue {
    CellValue::Categorical(options.choose(rng).expect("non-empty").to_string())
}

fn sentence(rng: &mut ChaCha8Rng) -> CellValue {
    let n = rng.random_range(1..=6);
    let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).expect("non-empty")).collect();
    CellValue::Text(words.join(" "))
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    crate::encode::quantile_sorted(&v, 0.5)
}

/// Generates the database described by `spec`. Identical specs give identical databases.
pub fn generate(spec: &SynthSpec) -> Result<Database, SynthError> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, rng::streams::SYNTH);
    let n = spec.n_targets;
    let epoch = NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date").and_hms_opt(0, 0, 0).expect("valid time");

    let mut parent = Table::new(
        "Parent",
        vec![
            ColumnSpec::new("id", ColumnKind::PrimaryKey),
            ColumnSpec::target("label"),
            ColumnSpec::new("score", ColumnKind::Scalar),
            ColumnSpec::new("segment", ColumnKind::Categorical),
            ColumnSpec::new("joined", ColumnKind::DateTime),
            ColumnSpec::new("location", ColumnKind::LatLong),
        ],
    );
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let score: f64 = (rng.random::<f64>() * 2000.0).round() / 100.0 - 10.0;
        scores.push(score);
        let joined = epoch + Duration::hours(rng.random_range(0..8 * 365 * 24));
        let location = CellValue::LatLong { lat: rng.random_range(-60.0..60.0), lon: rng.random_range(-180.0..180.0) };
        parent.rows.push(vec![
            key("p", i),
            CellValue::Null,
            CellValue::Scalar(score),
            pick(&mut rng, &["north", "south", "east", "west"]),
            CellValue::DateTime(joined),
            location,
        ]);
    }
    let mut tables = vec![parent];

    // Per-parent sums of the planted aggregates.
    let mut child_sum = vec![0.0; n];
    let mut grandchild_sum = vec![0.0; n];
    if spec.template != Template::Flat {
        let mut child = Table::new(
            "Child",
            vec![
                ColumnSpec::new("id", ColumnKind::PrimaryKey),
                ColumnSpec::foreign_key("parent_id", "Parent", "id"),
                ColumnSpec::new("amount", ColumnKind::Scalar),
                ColumnSpec::new("kind", ColumnKind::Categorical),
                ColumnSpec::new("note", ColumnKind::Text),
            ],
        );
        let mut child_parent = Vec::new();
        for (p, sum) in child_sum.iter_mut().enumerate() {
            for _ in 0..rng.random_range(spec.children.0..=spec.children.1) {
                let amount = rng.random_range(1..=100) as f64;
                *sum += amount;
                let c = child_parent.len();
                child_parent.push(p);
                child.rows.push(vec![
                    key("c", c),
                    key("p", p),
                    CellValue::Scalar(amount),
                    pick(&mut rng, &["a", "b", "c"]),
                    sentence(&mut rng),
                ]);
            }
        }
        tables.push(child);

        if spec.template == Template::ThreeLevel {
            let mut grandchild = Table::new(
                "Grandchild",
                vec![
                    ColumnSpec::new("id", ColumnKind::PrimaryKey),
                    ColumnSpec::foreign_key("child_id", "Child", "id"),
                    ColumnSpec::new("amount", ColumnKind::Scalar),
                    ColumnSpec::new("channel", ColumnKind::Categorical),
                ],
            );
            let mut g = 0;
            for (c, &p) in child_parent.iter().enumerate() {
                for _ in 0..rng.random_range(spec.children.0..=spec.children.1) {
                    let amount = rng.random_range(1..=100) as f64;
                    grandchild_sum[p] += amount;
                    grandchild.rows.push(vec![
                        key("g", g),
                        key("c", c),
                        CellValue::Scalar(amount),
                        pick(&mut rng, &["web", "store", "phone"]),
                    ]);
                    g += 1;
                }
            }
            tables.push(grandchild);
        }
    }

    let signal = match spec.signal {
        Signal::SingleTable => scores,
        Signal::ChildAggregate => child_sum,
        Signal::GrandchildAggregate => grandchild_sum,
    };
    let threshold = median(&signal);
    for (row, &s) in tables[0].rows.iter_mut().zip(&signal) {
        let clean = s > threshold;
        let flip = spec.noise > 0.0 && rng.random::<f64>() < spec.noise;
        row[1] = CellValue::Categorical(if clean != flip { "1" } else { "0" }.to_string());
    }
    Ok(Database::new(tables, true).expect("generated database is consistent"))
}

/// Small random database for property tests: up to `max_tables` tables of up
/// to `max_rows` rows, random foreign keys (self references and nulls
/// included), one integer scalar per table and a binary target in table 0.
pub fn random_database(seed: u64, max_tables: usize, max_rows: usize) -> Database {
    let mut rng = rng::stream(seed, rng::streams::SYNTH);
    let num_tables = rng.random_range(1..=max_tables.max(1));
    let rows: Vec<usize> =
        (0..num_tables).map(|t| rng.random_range(if t == 0 { 2 } else { 0 }..=max_rows.max(2))).collect();
    let mut tables = Vec::with_capacity(num_tables);
    for t in 0..num_tables {
        let name = format!("T{t}");
        let mut columns = vec![ColumnSpec::new("id", ColumnKind::PrimaryKey)];
        let num_fks = rng.random_range(0..=2);
        let mut refs = Vec::new();
        for f in 0..num_fks {
            let r = rng.random_range(0..num_tables);
            columns.push(ColumnSpec::foreign_key(format!("fk{f}"), &format!("T{r}"), "id"));
            refs.push(r);
        }
        columns.push(ColumnSpec::new("x", ColumnKind::Scalar));
        if t == 0 {
            columns.push(ColumnSpec::target("label"));
        }
        let mut table = Table::new(name, columns);
        for i in 0..rows[t] {
            let mut row = vec![CellValue::Key(format!("t{t}r{i}"))];
            for &r in &refs {
                row.push(if rows[r] == 0 || rng.random::<f64>() < 0.2 {
                    CellValue::Null
                } else {
                    CellValue::Key(format!("t{r}r{}", rng.random_range(0..rows[r])))
                });
            }
            row.push(if rng.random::<f64>() < 0.1 {
                CellValue::Null
            } else {
                CellValue::Scalar(rng.random_range(-50..=50) as f64)
            });
            if t == 0 {
                let label = if i < 2 { i % 2 == 1 } else { rng.random::<bool>() };
                row.push(CellValue::Categorical(if label { "1" } else { "0" }.into()));
            }
            table.rows.push(row);
        }
        tables.push(table);
    }
    Database::new(tables, true).expect("random database is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdb::remove_target_column;

    #[test]
    fn deterministic() {
        let spec = SynthSpec::new(Template::ThreeLevel, Signal::GrandchildAggregate, 50, 3).with_noise(0.1);
        assert_eq!(generate(&spec).unwrap().tables(), generate(&spec).unwrap().tables());
        assert_eq!(random_database(5, 6, 200).tables(), random_database(5, 6, 200).tables());
    }

    #[test]
    fn rejects_inexpressible_signal() {
        let spec = SynthSpec::new(Template::Flat, Signal::ChildAggregate, 10, 0);
        assert!(matches!(generate(&spec), Err(SynthError::SignalNeedsDepth { .. })));
        let spec = SynthSpec::new(Template::ParentChild, Signal::GrandchildAggregate, 10, 0);
        assert!(spec.validate().is_err());
        assert!(SynthSpec::new(Template::Flat, Signal::SingleTable, 10, 0).with_noise(1.0).validate().is_err());
    }

    #[test]
    fn random_databases_have_binary_targets() {
        for seed in 0..50 {
            let db = random_database(seed, 6, 30);
            remove_target_column(&db).unwrap();
        }
    }
}
