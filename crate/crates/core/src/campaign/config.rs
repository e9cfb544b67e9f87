use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mac::{LqCsmaParams, LqMapping, MacError};
use crate::protocols::{ProtocolError, ProtocolKind, Sensing};
use crate::rateless::{BlockSizeMenu, MAX_SOURCE_BLOCKS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Mac(#[from] MacError),
}

/// MAC overrides; unset fields keep their defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacOverrides {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub lq_min: Option<f64>,
    pub lq_max: Option<f64>,
    /// `"inverted"` or `"literal"`.
    pub mapping: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrpOverrides {
    pub d_min_ms: Option<f64>,
    pub d_max_ms: Option<f64>,
    pub ack_threshold: Option<f64>,
    pub beacon_holdoff_ms: Option<f64>,
}

/// One campaign description, either read from a TOML file or assembled
/// from command-line flags. Every field is optional so two of these can be
/// layered with [`ConfigFile::overlay`].
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub network: Option<PathBuf>,
    pub protocol: Option<String>,
    pub rounds: Option<usize>,
    pub data_len: Option<usize>,
    pub seed: Option<u64>,
    pub menu: Option<Vec<usize>>,
    pub fixed_block: Option<usize>,
    pub model: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub trace: Option<bool>,
    pub timeout_s: Option<f64>,
    /// `"domain"` or `"neighbors"`.
    pub sensing: Option<String>,
    #[serde(default)]
    pub mac: MacOverrides,
    #[serde(default)]
    pub drp: DrpOverrides,
}

impl ConfigFile {
    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut cfg: ConfigFile = toml::from_str(&text)
            .map_err(|e| ConfigError::Parse { path: path.display().to_string(), msg: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.network, &mut cfg.model, &mut cfg.out_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Fields set in `top` win over fields set in `self`.
    pub fn overlay(self, top: ConfigFile) -> ConfigFile {
        macro_rules! pick {
            ($($f:ident).+) => { top.$($f).+.or(self.$($f).+) };
        }
        ConfigFile {
            network: pick!(network),
            protocol: pick!(protocol),
            rounds: pick!(rounds),
            data_len: pick!(data_len),
            seed: pick!(seed),
            menu: pick!(menu),
            fixed_block: pick!(fixed_block),
            model: pick!(model),
            out_dir: pick!(out_dir),
            trace: pick!(trace),
            timeout_s: pick!(timeout_s),
            sensing: pick!(sensing),
            mac: MacOverrides {
                t_min: pick!(mac.t_min),
                t_max: pick!(mac.t_max),
                x: pick!(mac.x),
                y: pick!(mac.y),
                lq_min: pick!(mac.lq_min),
                lq_max: pick!(mac.lq_max),
                mapping: pick!(mac.mapping),
            },
            drp: DrpOverrides {
                d_min_ms: pick!(drp.d_min_ms),
                d_max_ms: pick!(drp.d_max_ms),
                ack_threshold: pick!(drp.ack_threshold),
                beacon_holdoff_ms: pick!(drp.beacon_holdoff_ms),
            },
        }
    }

    pub fn resolve(self) -> Result<RunConfig, ConfigError> {
        let d = RunConfig::defaults();
        let protocol = match &self.protocol {
            Some(p) => p.parse()?,
            None => d.protocol,
        };
        let mapping = match self.mac.mapping.as_deref() {
            None | Some("inverted") => LqMapping::Inverted,
            Some("literal") => LqMapping::Literal,
            Some(o) => return Err(ConfigError::Invalid(format!("unknown mac mapping `{o}` (inverted or literal)"))),
        };
        let sensing = match self.sensing.as_deref() {
            None | Some("domain") => Sensing::Domain,
            Some("neighbors") => Sensing::Neighbors,
            Some(o) => return Err(ConfigError::Invalid(format!("unknown sensing `{o}` (domain or neighbors)"))),
        };
        let menu = match self.menu {
            Some(sizes) => BlockSizeMenu::new(sizes).map_err(|e| ConfigError::Invalid(format!("menu: {e}")))?,
            None => d.menu,
        };
        let m = d.mac;
        let mac = LqCsmaParams {
            t_min: self.mac.t_min.unwrap_or(m.t_min),
            t_max: self.mac.t_max.unwrap_or(m.t_max),
            x: self.mac.x.unwrap_or(m.x),
            y: self.mac.y.unwrap_or(m.y),
            lq_min: self.mac.lq_min.unwrap_or(m.lq_min),
            lq_max: self.mac.lq_max.unwrap_or(m.lq_max),
            mapping,
        };
        let cfg = RunConfig {
            network: self.network.ok_or_else(|| ConfigError::Invalid("no network file given".into()))?,
            protocol,
            rounds: self.rounds.unwrap_or(d.rounds),
            data_len: self.data_len.unwrap_or(d.data_len),
            seed: self.seed.unwrap_or(d.seed),
            mac,
            drp: DrpTuning {
                d_min_ms: self.drp.d_min_ms.unwrap_or(d.drp.d_min_ms),
                d_max_ms: self.drp.d_max_ms.unwrap_or(d.drp.d_max_ms),
                ack_threshold: self.drp.ack_threshold.unwrap_or(d.drp.ack_threshold),
                beacon_holdoff_ms: self.drp.beacon_holdoff_ms.unwrap_or(d.drp.beacon_holdoff_ms),
            },
            menu,
            fixed_block: self.fixed_block,
            model: self.model,
            out_dir: self.out_dir.unwrap_or(d.out_dir),
            trace: self.trace.unwrap_or(false),
            timeout_s: self.timeout_s.unwrap_or(d.timeout_s),
            sensing,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrpTuning {
    pub d_min_ms: f64,
    pub d_max_ms: f64,
    pub ack_threshold: f64,
    pub beacon_holdoff_ms: f64,
}

/// A fully resolved and validated campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub network: PathBuf,
    pub protocol: ProtocolKind,
    pub rounds: usize,
    pub data_len: usize,
    pub seed: u64,
    pub mac: LqCsmaParams,
    pub drp: DrpTuning,
    pub menu: BlockSizeMenu,
    pub fixed_block: Option<usize>,
    /// Exported ordinal-tree model (model-driven protocols only).
    pub model: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub trace: bool,
    pub timeout_s: f64,
    pub sensing: Sensing,
}

impl RunConfig {
    fn defaults() -> RunConfig {
        let drp = crate::protocols::DrpConfig::default();
        RunConfig {
            network: PathBuf::new(),
            protocol: ProtocolKind::Edrp,
            rounds: 100,
            data_len: 1000,
            seed: 1,
            mac: LqCsmaParams::default(),
            drp: DrpTuning {
                d_min_ms: drp.d_min_ms,
                d_max_ms: drp.d_max_ms,
                ack_threshold: drp.ack_threshold,
                beacon_holdoff_ms: drp.beacon_holdoff_ms,
            },
            menu: BlockSizeMenu::packed(),
            fixed_block: None,
            model: None,
            out_dir: PathBuf::from("out"),
            trace: false,
            timeout_s: 60.0,
            sensing: Sensing::Domain,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.rounds < 1 {
            return bad("rounds must be at least 1".into());
        }
        if self.data_len < 1 {
            return bad("data_len must be at least 1".into());
        }
        if !self.network.is_file() {
            return bad(format!("network file {} does not exist", self.network.display()));
        }
        self.mac.validate()?;
        let smallest = self.fixed_block.unwrap_or(self.menu.sizes()[0]).min(self.menu.sizes()[0]);
        if self.data_len.div_ceil(smallest) > MAX_SOURCE_BLOCKS {
            return bad(format!(
                "data_len {} needs more than {MAX_SOURCE_BLOCKS} blocks of {smallest} bytes",
                self.data_len
            ));
        }
        if self.fixed_block == Some(0) {
            return bad("fixed_block must be positive".into());
        }
        if !(self.drp.d_min_ms >= 0.0 && self.drp.d_min_ms <= self.drp.d_max_ms) {
            return bad("drp delays need 0 <= d_min_ms <= d_max_ms".into());
        }
        if !(self.drp.ack_threshold > 0.0 && self.drp.ack_threshold <= 1.0) {
            return bad("drp ack_threshold must lie in (0, 1]".into());
        }
        if !(self.timeout_s > 0.0) {
            return bad("timeout_s must be positive".into());
        }
        if self.protocol.needs_model() && self.fixed_block.is_none() {
            match &self.model {
                None => return Err(ProtocolError::MissingModel(self.protocol).into()),
                Some(p) if !p.is_file() => return bad(format!("model file {} does not exist", p.display())),
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Hex SHA-256 over every field that affects results. Output location
    /// and tracing are excluded; referenced files contribute their bytes.
    pub fn config_hash(&self) -> Result<String, ConfigError> {
        let read =
            |p: &Path| std::fs::read(p).map_err(|source| ConfigError::Io { path: p.display().to_string(), source });
        let mut h = Sha256::new();
        let m = &self.mac;
        let d = &self.drp;
        let canonical = format!(
            "protocol={}\nrounds={}\ndata_len={}\nseed={}\nmac={},{},{},{},{},{},{:?}\n\
             drp={},{},{},{}\nmenu={:?}\nfixed_block={:?}\ntimeout_s={}\nsensing={:?}\n",
            self.protocol,
            self.rounds,
            self.data_len,
            self.seed,
            m.t_min,
            m.t_max,
            m.x,
            m.y,
            m.lq_min,
            m.lq_max,
            m.mapping,
            d.d_min_ms,
            d.d_max_ms,
            d.ack_threshold,
            d.beacon_holdoff_ms,
            self.menu.sizes(),
            self.fixed_block,
            self.timeout_s,
            self.sensing,
        );
        h.update(canonical.as_bytes());
        h.update(b"network\n");
        h.update(read(&self.network)?);
        // A fixed block size bypasses the model entirely.
        if let (Some(p), true, None) = (&self.model, self.protocol.needs_model(), self.fixed_block) {
            h.update(b"model\n");
            h.update(read(p)?);
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    const NET: &str = "[nodes]\ncount = 2\n[[edges]]\nparent = 0\nchild = 1\ntrace = \"[(0, 0.9)]\"\n";

    #[test]
    fn file_values_are_overridden_by_flags_and_paths_are_file_relative() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "net.toml", NET);
        let cfg_path = write(
            dir.path(),
            "run.toml",
            "network = \"net.toml\"\nprotocol = \"drp\"\nrounds = 5\n[mac]\nt_max = 500.0\n",
        );
        let file = ConfigFile::load(&cfg_path).unwrap();
        let flags = ConfigFile {
            rounds: Some(9),
            mac: MacOverrides { x: Some(10.0), ..Default::default() },
            ..Default::default()
        };
        let cfg = file.overlay(flags).resolve().unwrap();
        assert_eq!(cfg.rounds, 9);
        assert_eq!(cfg.protocol, ProtocolKind::Drp);
        assert_eq!((cfg.mac.t_max, cfg.mac.x), (500.0, 10.0));
        assert_eq!(cfg.network, dir.path().join("net.toml"));
    }

    #[test]
    fn validation_errors() {
        let dir = tempfile::tempdir().unwrap();
        let net = write(dir.path(), "net.toml", NET);
        let base = ConfigFile { network: Some(net), protocol: Some("drp".into()), ..Default::default() };
        let with = |f: ConfigFile| base.clone().overlay(f).resolve();
        assert!(with(ConfigFile { rounds: Some(0), ..Default::default() }).is_err());
        assert!(with(ConfigFile { data_len: Some(0), ..Default::default() }).is_err());
        assert!(with(ConfigFile { protocol: Some("flood".into()), ..Default::default() }).is_err());
        assert!(matches!(
            with(ConfigFile { protocol: Some("edrp".into()), ..Default::default() }),
            Err(ConfigError::Protocol(ProtocolError::MissingModel(ProtocolKind::Edrp)))
        ));
        assert!(with(ConfigFile { protocol: Some("edrp".into()), fixed_block: Some(30), ..Default::default() }).is_ok());
        assert!(with(ConfigFile { network: Some(dir.path().join("missing.toml")), ..Default::default() }).is_err());
    }

    #[test]
    fn hash_tracks_semantic_fields_only() {
        let dir = tempfile::tempdir().unwrap();
        let net = write(dir.path(), "net.toml", NET);
        let base = ConfigFile { network: Some(net), protocol: Some("drp".into()), ..Default::default() };
        let h = |f: ConfigFile| base.clone().overlay(f).resolve().unwrap().config_hash().unwrap();
        let h0 = h(ConfigFile::default());
        assert_eq!(h0, h(ConfigFile { out_dir: Some("elsewhere".into()), trace: Some(true), ..Default::default() }));
        assert_ne!(h0, h(ConfigFile { seed: Some(2), ..Default::default() }));
        assert_ne!(
            h0,
            h(ConfigFile { mac: MacOverrides { y: Some(-20.0), ..Default::default() }, ..Default::default() })
        );
    }
}
