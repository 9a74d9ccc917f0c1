//! Parsers for the small value grammars used by flags: ranges
//! ("min:max:cells"), scalar-or-range, intervals ("lo:hi"), and key=value
//! lists ("deltaR=1.4,tauR=-0.45").

use std::str::FromStr;

use anyhow::{anyhow, bail, Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RangeSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl FromStr for RangeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            bail!("expected min:max:cells, got `{s}`");
        }
        Ok(Self {
            min: parts[0].parse().map_err(|e| anyhow!("bad range min `{}`: {e}", parts[0]))?,
            max: parts[1].parse().map_err(|e| anyhow!("bad range max `{}`: {e}", parts[1]))?,
            n: parts[2].parse().map_err(|e| anyhow!("bad cell count `{}`: {e}", parts[2]))?,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ScalarOrRange {
    Scalar(f64),
    Range(RangeSpec),
}

impl FromStr for ScalarOrRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.contains(':') {
            Ok(ScalarOrRange::Range(s.parse()?))
        } else {
            Ok(ScalarOrRange::Scalar(
                s.parse().map_err(|e| anyhow!("bad number `{s}`: {e}"))?,
            ))
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for Interval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 2 {
            bail!("expected lo:hi, got `{s}`");
        }
        Ok(Self { lo: parts[0].parse()?, hi: parts[1].parse()? })
    }
}

/// Comma-separated key=value pairs, order preserved.
#[derive(Debug, Clone, Default)]
pub struct KvList(pub Vec<(String, f64)>);

impl FromStr for KvList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = Vec::new();
        for item in s.split(',').filter(|i| !i.is_empty()) {
            let Some((key, value)) = item.split_once('=') else {
                bail!("expected key=value, got `{item}`");
            };
            out.push((
                key.trim().to_string(),
                value.trim().parse().map_err(|e| anyhow!("bad value in `{item}`: {e}"))?,
            ));
        }
        if out.is_empty() {
            bail!("empty key=value list");
        }
        Ok(Self(out))
    }
}

impl KvList {
    pub fn exactly_two(&self) -> Result<[(String, f64); 2]> {
        if self.0.len() != 2 {
            bail!("expected exactly two key=value entries");
        }
        Ok([self.0[0].clone(), self.0[1].clone()])
    }
}
