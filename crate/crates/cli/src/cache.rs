//! On-disk cache of exhaustion Green's kernel families.
//!
//! Entries are keyed by a SHA-256 over (model, grid, pole, solver tolerance,
//! code version). A blob is `NCKC`, a format version, the SHA-256 of the body
//! and the body: member count, then per member the domain radius, the
//! truncation estimate (NaN when absent), the value count and the values, all
//! little-endian.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use negcurv::green::{exhaustion_green, Construction, GreenKernel};
use negcurv::numerics::solve::DEFAULT_REL_TOL;
use negcurv::{discrete_laplacian, GridSpec, ScalarField, WarpedModel};

use crate::config::config_error;

const MAGIC: &[u8; 4] = b"NCKC";
const FORMAT_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CachePolicy {
    Off,
    Use,
    Rebuild,
}

impl std::str::FromStr for CachePolicy {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "off" => Ok(CachePolicy::Off),
            "use" => Ok(CachePolicy::Use),
            "rebuild" => Ok(CachePolicy::Rebuild),
            other => Err(config_error(format!(
                "unknown cache policy '{other}' (off|use|rebuild)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lookup {
    Hit,
    Miss,
    Corrupt,
    Disabled,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    model: &'a WarpedModel,
    grid: &'a GridSpec,
    pole: f64,
    tolerance: f64,
    version: &'a str,
}

#[derive(Debug, Clone)]
pub struct KernelCache {
    pub dir: PathBuf,
    pub policy: CachePolicy,
    pub version: String,
    pub tolerance: f64,
}

impl KernelCache {
    pub fn new(dir: impl Into<PathBuf>, policy: CachePolicy) -> Self {
        KernelCache {
            dir: dir.into(),
            policy,
            version: CODE_VERSION.to_string(),
            tolerance: DEFAULT_REL_TOL,
        }
    }

    pub fn disabled() -> Self {
        KernelCache::new(PathBuf::new(), CachePolicy::Off)
    }

    pub fn key(&self, model: &WarpedModel, spec: &GridSpec, pole: f64) -> String {
        let material = KeyMaterial {
            model,
            grid: spec,
            pole,
            tolerance: self.tolerance,
            version: &self.version,
        };
        let bytes = serde_json::to_vec(&material).expect("key material serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.nckc"))
    }

    /// Exhaustion family of the pole at `pole` on `spec`, from the cache when possible.
    pub fn family(
        &self,
        model: &WarpedModel,
        spec: &GridSpec,
        pole: f64,
    ) -> anyhow::Result<(Vec<GreenKernel>, Lookup)> {
        let spec = spec.clone().centered_at(pole);
        if self.policy == CachePolicy::Off {
            return Ok((compute(model, &spec)?, Lookup::Disabled));
        }
        let key = self.key(model, &spec, pole);
        let path = self.path(&key);
        let mut lookup = Lookup::Miss;
        if self.policy == CachePolicy::Use && path.exists() {
            match std::fs::read(&path)
                .map_err(anyhow::Error::from)
                .and_then(|b| decode(&b))
                .and_then(|members| rebuild(model, &spec, pole, members))
            {
                Ok(kernels) => return Ok((kernels, Lookup::Hit)),
                Err(e) => {
                    log::warn!(
                        "cache entry {} is corrupt ({e}); rebuilding",
                        path.display()
                    );
                    lookup = Lookup::Corrupt;
                }
            }
        }
        let kernels = compute(model, &spec)?;
        std::fs::create_dir_all(&self.dir)
            .with_context(|| format!("creating cache directory {}", self.dir.display()))?;
        write_atomic(&path, &encode(&kernels))?;
        Ok((kernels, lookup))
    }
}

fn compute(model: &WarpedModel, spec: &GridSpec) -> anyhow::Result<Vec<GreenKernel>> {
    let grid = spec.build(model)?;
    Ok(exhaustion_green(&discrete_laplacian(&grid))?)
}

struct Member {
    domain_radius: f64,
    truncation: Option<f64>,
    values: Vec<f64>,
}

fn encode(kernels: &[GreenKernel]) -> Vec<u8> {
    let mut body = Vec::new();
    body.extend_from_slice(&(kernels.len() as u64).to_le_bytes());
    for k in kernels {
        body.extend_from_slice(&k.domain_radius.to_le_bytes());
        body.extend_from_slice(&k.truncation_estimate.unwrap_or(f64::NAN).to_le_bytes());
        body.extend_from_slice(&(k.values.values.len() as u64).to_le_bytes());
        for v in &k.values.values {
            body.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut out = Vec::with_capacity(body.len() + 40);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&body));
    out.extend_from_slice(&body);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> anyhow::Result<&[u8]> {
        if self.bytes.len() < n {
            anyhow::bail!("truncated entry");
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u64(&mut self) -> anyhow::Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into()?))
    }

    fn f64(&mut self) -> anyhow::Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into()?))
    }
}

fn decode(bytes: &[u8]) -> anyhow::Result<Vec<Member>> {
    let mut r = Reader { bytes };
    if r.take(4)? != MAGIC {
        anyhow::bail!("bad magic");
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into()?);
    if version != FORMAT_VERSION {
        anyhow::bail!("format version {version}");
    }
    let digest = r.take(32)?.to_vec();
    if Sha256::digest(r.bytes).as_slice() != digest.as_slice() {
        anyhow::bail!("checksum mismatch");
    }
    let count = r.u64()? as usize;
    let mut members = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let domain_radius = r.f64()?;
        let t = r.f64()?;
        let n = r.u64()? as usize;
        let raw = r.take(
            n.checked_mul(8)
                .ok_or_else(|| anyhow::anyhow!("bad length"))?,
        )?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        members.push(Member {
            domain_radius,
            truncation: (!t.is_nan()).then_some(t),
            values,
        });
    }
    if !r.bytes.is_empty() {
        anyhow::bail!("trailing bytes");
    }
    Ok(members)
}

fn rebuild(
    model: &WarpedModel,
    spec: &GridSpec,
    pole: f64,
    members: Vec<Member>,
) -> anyhow::Result<Vec<GreenKernel>> {
    let grid = spec.build(model)?;
    if members.is_empty() || members.len() != grid.exhaustion_radii.len() {
        anyhow::bail!("member count does not match the grid");
    }
    members
        .into_iter()
        .map(|m| {
            Ok(GreenKernel {
                pole_radius: pole,
                values: ScalarField::new(grid.clone(), m.values)?,
                domain_radius: m.domain_radius,
                flux_norm: 1.0,
                construction: Construction::Exhaustion {
                    radius: m.domain_radius,
                },
                truncation_estimate: m.truncation,
                solve: None,
            })
        })
        .collect()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (WarpedModel, GridSpec) {
        let m = WarpedModel::hyperbolic(2, -1.0)
            .unwrap()
            .certify(10.0)
            .unwrap();
        (m, GridSpec::new(4.0, 64, 32, 2))
    }

    #[test]
    fn hit_miss_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let (m, spec) = setup();
        let cache = KernelCache::new(dir.path(), CachePolicy::Use);
        let (a, l1) = cache.family(&m, &spec, 1.0).unwrap();
        let path = cache.path(&cache.key(&m, &spec.clone().centered_at(1.0), 1.0));
        let blob = std::fs::read(&path).unwrap();
        let (b, l2) = cache.family(&m, &spec, 1.0).unwrap();
        assert_eq!((l1, l2), (Lookup::Miss, Lookup::Hit));
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values.values, y.values.values);
            assert_eq!(x.truncation_estimate, y.truncation_estimate);
        }
        assert_eq!(encode(&b), blob);
        let mut bad = blob.clone();
        let last = bad.len() - 1;
        bad[last] ^= 1;
        std::fs::write(&path, &bad).unwrap();
        let (_, l3) = cache.family(&m, &spec, 1.0).unwrap();
        assert_eq!(l3, Lookup::Corrupt);
        assert_eq!(std::fs::read(&path).unwrap(), blob);
    }

    #[test]
    fn key_changes() {
        let (m, spec) = setup();
        let cache = KernelCache::new("unused", CachePolicy::Use);
        let k = cache.key(&m, &spec, 1.0);
        assert_eq!(k, cache.key(&m, &spec, 1.0));
        assert_ne!(k, cache.key(&m, &spec, 2.0));
        let tighter = KernelCache {
            tolerance: 1e-12,
            ..cache.clone()
        };
        assert_ne!(k, tighter.key(&m, &spec, 1.0));
        let bumped = KernelCache {
            version: "9.9.9".into(),
            ..cache.clone()
        };
        assert_ne!(k, bumped.key(&m, &spec, 1.0));
        let rebuild = KernelCache::new("unused", CachePolicy::Rebuild);
        assert_eq!(k, rebuild.key(&m, &spec, 1.0));
    }
}
