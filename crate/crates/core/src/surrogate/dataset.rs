use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::genome::Genome;
use crate::{Error, Result};

/// One row of the population dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub genome: Genome,
    /// Actual (simulated) fitness on the normalized scale.
    pub fitness: f64,
    /// 1-indexed generation stamp; drives the sample weight.
    pub generation: u32,
}

/// Append-only training set of actual fitness evaluations.
///
/// A row is dropped only when both its genes and its fitness already appear;
/// the same genome with a different (noisy) score is kept as another row.
#[derive(Debug, Clone, Default)]
pub struct PopulationDataset {
    records: Vec<EvalRecord>,
    seen: HashMap<(Vec<u8>, u64), usize>,
}

fn fitness_key(f: f64) -> u64 {
    // fold -0.0 onto 0.0
    (f + 0.0).to_bits()
}

impl PopulationDataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a record and returns `true` if a new row was appended. A
    /// duplicate only moves the stored generation stamp forward.
    pub fn insert(&mut self, genome: &Genome, fitness: f64, generation: u32) -> Result<bool> {
        if generation < 1 {
            return Err(Error::invalid("generation stamps start at 1"));
        }
        if let Some(first) = self.records.first() {
            if first.genome.len() != genome.len() {
                return Err(Error::Dimension {
                    expected: first.genome.len(),
                    got: genome.len(),
                });
            }
        }
        let key = (genome.genes.clone(), fitness_key(fitness));
        if let Some(&i) = self.seen.get(&key) {
            let rec = &mut self.records[i];
            rec.generation = rec.generation.max(generation);
            return Ok(false);
        }
        self.seen.insert(key, self.records.len());
        self.records.push(EvalRecord {
            genome: genome.clone(),
            fitness,
            generation,
        });
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EvalRecord] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, EvalRecord> {
        self.records.iter()
    }

    /// Feature dimension, `None` while empty.
    pub fn dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.genome.len())
    }

    /// The record with the highest fitness; ties go to the earliest row.
    pub fn best(&self) -> Result<&EvalRecord> {
        let mut best: Option<&EvalRecord> = None;
        for r in &self.records {
            if best.is_none_or(|b| r.fitness > b.fitness) {
                best = Some(r);
            }
        }
        best.ok_or(Error::EmptyDataset)
    }

    /// Writes `a_1..a_d,fitness,generation`.
    pub fn to_csv(&self) -> String {
        let d = self.dim().unwrap_or(0);
        let mut out = String::new();
        for j in 1..=d {
            let _ = write!(out, "a_{j},");
        }
        out.push_str("fitness,generation\n");
        for r in &self.records {
            for g in &r.genome.genes {
                let _ = write!(out, "{g},");
            }
            let _ = writeln!(out, "{},{}", r.fitness, r.generation);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Schema("missing header".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        let d = header.len().checked_sub(2).ok_or_else(|| Error::Schema("short header".into()))?;
        let expected: Vec<String> = (1..=d)
            .map(|j| format!("a_{j}"))
            .chain(["fitness".to_string(), "generation".to_string()])
            .collect();
        if header != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Schema("header must be a_1..a_d,fitness,generation".into()));
        }
        let mut ds = Self::new();
        for (n, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != d + 2 {
                return Err(Error::Schema(format!("row {} has {} cells", n + 1, cells.len())));
            }
            let bad = |what: &str| Error::Schema(format!("row {}: bad {what}", n + 1));
            let genes = cells[..d]
                .iter()
                .map(|c| c.parse::<u8>().map_err(|_| bad("gene")))
                .collect::<Result<Vec<_>>>()?;
            let fitness = cells[d].parse::<f64>().map_err(|_| bad("fitness"))?;
            let generation = cells[d + 1].parse::<u32>().map_err(|_| bad("generation"))?;
            ds.insert(&Genome::new(genes), fitness, generation)?;
        }
        Ok(ds)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}
