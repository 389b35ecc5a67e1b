//! File formats: the observation dataset (CSV) and the posterior ensemble
//! (binary, self-describing).
//!
//! Dataset columns are `series_id,t,action,fractal_value`; `action` is the
//! action taken between `t - 1` and `t`, `-1` on the first row of a series.
//!
//! Ensemble layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "RBMENSB\0"
//! version      u32      1
//! header_len   u32
//! header       JSON     {n_states, n_actions, n_samples, n_params, layout, chains}
//! samples      n_samples x (log_post f64, n_params x f64)
//! ```
//!
//! An absent log-posterior is stored as NaN.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, ChainMeta, ModelSample, PosteriorEnsemble};

pub const ENSEMBLE_MAGIC: &[u8; 8] = b"RBMENSB\0";
pub const ENSEMBLE_VERSION: u32 = 1;

/// One observed time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub id: String,
    /// Fractal values `z_0..z_{n-1}`, all nonpositive.
    pub observations: Vec<f64>,
    /// `actions[t]` is taken after observing `z_t` and leads to `z_{t+1}`.
    pub actions: Vec<Action>,
}

impl Series {
    pub fn new(id: impl Into<String>, observations: Vec<f64>, actions: Vec<Action>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyInput("series without observations"));
        }
        if actions.len() + 1 != observations.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} observations need {} actions, got {}",
                observations.len(),
                observations.len() - 1,
                actions.len()
            )));
        }
        Ok(Series {
            id: id.into(),
            observations,
            actions,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Action that led to observation `t`.
    pub fn prev_action(&self, t: usize) -> Option<Action> {
        t.checked_sub(1).map(|i| self.actions[i])
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub series: Vec<Series>,
}

impl Dataset {
    pub fn n_observations(&self) -> usize {
        self.series.iter().map(Series::len).sum()
    }

    pub fn read_csv<R: Read>(reader: R, n_actions: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| -> Result<usize> {
            headers.iter().position(|h| h == name).ok_or(Error::Parse {
                line: 1,
                message: format!("missing column `{name}`"),
            })
        };
        let (c_id, c_t, c_a, c_z) = (col("series_id")?, col("t")?, col("action")?, col("fractal_value")?);

        let mut order: Vec<String> = Vec::new();
        let mut by_id: HashMap<String, (Vec<f64>, Vec<Action>)> = HashMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let err = |message: String| Error::Parse { line, message };
            let field = |i: usize| rec.get(i).ok_or_else(|| err(format!("missing field {i}")));
            let id = field(c_id)?.to_string();
            let t: usize = field(c_t)?.parse().map_err(|e| err(format!("bad t: {e}")))?;
            let action: i64 = field(c_a)?.parse().map_err(|e| err(format!("bad action: {e}")))?;
            let z: f64 = field(c_z)?
                .parse()
                .map_err(|e| err(format!("bad fractal_value: {e}")))?;
            if !z.is_finite() || z > 0.0 {
                return Err(err(format!("fractal_value {z} must be finite and <= 0")));
            }
            let entry = by_id.entry(id.clone()).or_insert_with(|| {
                order.push(id.clone());
                (Vec::new(), Vec::new())
            });
            if t != entry.0.len() {
                return Err(err(format!("series `{id}` expects t = {}, found {t}", entry.0.len())));
            }
            if t == 0 {
                if action != -1 {
                    return Err(err(format!("first row of `{id}` must have action -1")));
                }
            } else {
                if action < 0 || action as usize >= n_actions {
                    return Err(err(format!("action {action} outside 0..{n_actions}")));
                }
                entry.1.push(action as usize);
            }
            entry.0.push(z);
        }
        let series = order
            .into_iter()
            .map(|id| {
                let (obs, acts) = by_id.remove(&id).expect("id recorded");
                Series::new(id, obs, acts)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { series })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["series_id", "t", "action", "fractal_value"])?;
        for s in &self.series {
            for (t, z) in s.observations.iter().enumerate() {
                let a = s.prev_action(t).map_or(-1, |a| a as i64);
                w.write_record([s.id.clone(), t.to_string(), a.to_string(), z.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, n_actions: usize) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?), n_actions)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EnsembleHeader {
    n_states: usize,
    n_actions: usize,
    n_samples: usize,
    n_params: usize,
    layout: Vec<String>,
    #[serde(default)]
    chains: Vec<ChainMeta>,
}

impl PosteriorEnsemble {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let (ns, na) = (self.n_states(), self.n_actions());
        let header = EnsembleHeader {
            n_states: ns,
            n_actions: na,
            n_samples: self.len(),
            n_params: ModelSample::flat_len(ns, na),
            layout: ModelSample::parameter_names(ns, na),
            chains: self.chains().to_vec(),
        };
        let header = serde_json::to_vec(&header)?;
        w.write_all(ENSEMBLE_MAGIC)?;
        w.write_all(&ENSEMBLE_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        for s in self.samples() {
            w.write_all(&s.log_post.unwrap_or(f64::NAN).to_le_bytes())?;
            for v in s.to_flat() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != ENSEMBLE_MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != ENSEMBLE_VERSION {
            return Err(Error::Format(format!("version {version}")));
        }
        r.read_exact(&mut word)?;
        let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
        r.read_exact(&mut header)?;
        let header: EnsembleHeader = serde_json::from_slice(&header)?;
        if header.n_actions < 1 || header.n_params != ModelSample::flat_len(header.n_states, header.n_actions) {
            return Err(Error::Format(format!(
                "{} parameters do not fit {} states x {} actions",
                header.n_params, header.n_states, header.n_actions
            )));
        }
        let mut buf = [0u8; 8];
        let mut next = |r: &mut R| -> Result<f64> {
            r.read_exact(&mut buf)?;
            Ok(f64::from_le_bytes(buf))
        };
        let mut samples = Vec::with_capacity(header.n_samples);
        let mut flat = vec![0.0; header.n_params];
        for _ in 0..header.n_samples {
            let lp = next(&mut r)?;
            for v in flat.iter_mut() {
                *v = next(&mut r)?;
            }
            let log_post = if lp.is_nan() { None } else { Some(lp) };
            samples.push(ModelSample::from_flat(
                header.n_states,
                header.n_actions,
                &flat,
                log_post,
            )?);
        }
        PosteriorEnsemble::new(samples, header.chains)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
