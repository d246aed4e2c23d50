use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use drainage::network::{parse_network_file, serialize_network};
use drainage::rainfall::RainfallConfig;
use drainage::{HydraulicParams, RainfallModel, RiverNetwork};
use sha2::{Digest, Sha256};

/// A loaded experiment: network, rates and the effective rainfall block.
pub struct Experiment {
    pub network: RiverNetwork,
    pub params: HydraulicParams,
    pub rain_config: Option<RainfallConfig>,
}

impl Experiment {
    pub fn load(network: &Path, rain: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(network).with_context(|| format!("cannot read network file {}", network.display()))?;
        let file = parse_network_file(&text).with_context(|| format!("invalid network file {}", network.display()))?;
        let mut rain_config = match rain {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("cannot read rainfall file {}", path.display()))?;
                Some(RainfallConfig::parse(&text).with_context(|| format!("invalid rainfall file {}", path.display()))?)
            }
            None if overrides.is_empty() => None,
            None => Some(RainfallConfig::default()),
        };
        if let Some(cfg) = rain_config.as_mut() {
            for item in overrides {
                let Some((k, v)) = item.split_once('=') else {
                    bail!("--rain-set expects key=value, got '{item}'");
                };
                cfg.set(k.trim(), v.trim()).with_context(|| format!("bad --rain-set '{item}'"))?;
            }
        }
        Ok(Self { network: file.network, params: file.params, rain_config })
    }

    pub fn rain(&self) -> Result<RainfallModel> {
        let cfg = self.rain_config.as_ref().context("this command needs --rain (or --rain-set)")?;
        let model = cfg.build().context("invalid rainfall configuration")?;
        model.check_network(&self.network)?;
        Ok(model)
    }

    /// SHA-256 of the canonical network, rainfall block and command options.
    pub fn hash(&self, options: &[(String, String)]) -> String {
        let mut text = String::from("[network]\n");
        text.push_str(&serialize_network(&self.network, &self.params));
        text.push_str("[rain]\n");
        if let Some(cfg) = &self.rain_config {
            text.push_str(&cfg.to_text());
        }
        text.push_str("[options]\n");
        for (k, v) in options {
            text.push_str(&format!("{k}={v}\n"));
        }
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Edge indices from a comma-separated id list, `all`, or the root by default.
    pub fn edges(&self, selection: Option<&str>) -> Result<Vec<usize>> {
        match selection {
            None => Ok(vec![self.network.root()]),
            Some("all") => Ok((0..self.network.len()).collect()),
            Some(list) => list
                .split(',')
                .map(|id| {
                    let id = id.trim();
                    self.network.index_of(id).with_context(|| format!("unknown edge id '{id}'"))
                })
                .collect(),
        }
    }
}

/// Parses `lo,hi` with `0 < lo <= hi`.
pub fn parse_range(text: &str) -> Result<(f64, f64)> {
    let (a, b) = text.split_once(',').with_context(|| format!("expected lo,hi, got '{text}'"))?;
    let lo: f64 = a.trim().parse().with_context(|| format!("bad number '{a}'"))?;
    let hi: f64 = b.trim().parse().with_context(|| format!("bad number '{b}'"))?;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        bail!("range must satisfy 0 < lo <= hi, got {lo},{hi}");
    }
    Ok((lo, hi))
}
