//! Persistence: run configs, CSV tables, binary basis and checkpoint files,
//! and run manifests with SHA-256 checksums.
//!
//! Config files are flat `key = value` text, one pair per line, `#` starts a
//! comment. Unknown or repeated keys are errors. Keys:
//!
//! | key | value |
//! |-----|-------|
//! | `b` | polar semi-axis in `(0, 1]` |
//! | `omega` | rotation rate `≥ 0` |
//! | `l_max`, `n_theta`, `n_phi` | resolution |
//! | `dt` | `auto` or a positive step |
//! | `T` | final time |
//! | `initial_condition` | `random`, `single` or `zonal` |
//! | `ic_l`, `ic_m` | mode for `single` |
//! | `l_cut` | band limit for `random`/`zonal` |
//! | `M0`, `k` | initial `Hᵏ` norm and its order |
//! | `seed`, `diag_every`, `energy_tol`, `cfl`, `filter` | as in [`RunConfig`] |
//!
//! Binary files are little-endian. Basis file:
//!
//! ```text
//! "ZNLBASIS" | u32 version | u32 0x01020304 | f64 b | u32 l_max | u32 n_theta | u32 n_phi
//! per m = 0..=l_max: u32 n_modes | f64[n] Λ | f64[n_theta·n] g | f64[n_theta·n] g'
//! ```
//!
//! Checkpoint file:
//!
//! ```text
//! "ZNLCHKPT" | u32 version | u32 0x01020304 | u64 len | config text (UTF-8)
//! f64 t | u64 step_count | f64 dt | u32 l_max | u64 n
//! f64[2n] ζ (re, im) | f64[2n] ∫ψ dt (re, im)
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::basis::{make_table, Basis, SpectralScalar};
use crate::dynamics::{DiagnosticsTable, InitialCondition, RunConfig, SolverState, TimeStep};
use crate::error::{Error, Result};
use crate::experiments::{ContinuationRow, SweepResult};
use crate::geometry::Geometry;
use crate::toy::ToyAveragingReport;

const BASIS_MAGIC: &[u8; 8] = b"ZNLBASIS";
const CHECKPOINT_MAGIC: &[u8; 8] = b"ZNLCHKPT";
const FORMAT_VERSION: u32 = 1;
const ENDIAN_TAG: u32 = 0x0102_0304;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

// ---------------------------------------------------------------- config

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut pairs: BTreeMap<String, String> = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
        let key = key.trim().to_string();
        if pairs.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", no + 1)));
        }
    }
    let mut cfg = RunConfig::default();
    let mut ic_kind = None;
    let (mut ic_l, mut ic_m, mut l_cut) = (None, None, None);
    for (key, value) in &pairs {
        match key.as_str() {
            "b" => cfg.b = num(key, value)?,
            "omega" => cfg.omega = num(key, value)?,
            "l_max" => cfg.l_max = num(key, value)?,
            "n_theta" => cfg.n_theta = num(key, value)?,
            "n_phi" => cfg.n_phi = num(key, value)?,
            "dt" => {
                cfg.dt = if value == "auto" { TimeStep::Auto } else { TimeStep::Fixed(num(key, value)?) };
            }
            "T" => cfg.t_final = num(key, value)?,
            "initial_condition" => ic_kind = Some(value.clone()),
            "ic_l" => ic_l = Some(num(key, value)?),
            "ic_m" => ic_m = Some(num(key, value)?),
            "l_cut" => l_cut = Some(num(key, value)?),
            "M0" => cfg.m0 = num(key, value)?,
            "k" => cfg.k = num(key, value)?,
            "seed" => cfg.seed = num(key, value)?,
            "diag_every" => cfg.diag_every = num(key, value)?,
            "energy_tol" => cfg.energy_tol = num(key, value)?,
            "cfl" => cfg.cfl = num(key, value)?,
            "filter" => cfg.filter = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
    }
    cfg.initial_condition = match ic_kind.as_deref().unwrap_or("random") {
        "random" => InitialCondition::RandomBandLimited { l_cut },
        "zonal" => InitialCondition::Zonal { l_cut },
        "single" => {
            let (Some(l), Some(m)) = (ic_l, ic_m) else {
                return Err(Error::Config("initial_condition = single needs ic_l and ic_m".into()));
            };
            InitialCondition::SingleMode { l, m }
        }
        other => return Err(Error::Config(format!("unknown initial_condition `{other}`"))),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Inverse of [`parse_config`]; every key written explicitly.
pub fn format_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("b", fmt_f64(cfg.b));
    kv("omega", fmt_f64(cfg.omega));
    kv("l_max", cfg.l_max.to_string());
    kv("n_theta", cfg.n_theta.to_string());
    kv("n_phi", cfg.n_phi.to_string());
    kv(
        "dt",
        match cfg.dt {
            TimeStep::Auto => "auto".into(),
            TimeStep::Fixed(dt) => fmt_f64(dt),
        },
    );
    kv("T", fmt_f64(cfg.t_final));
    match cfg.initial_condition {
        InitialCondition::RandomBandLimited { l_cut } | InitialCondition::Zonal { l_cut } => {
            let name = if matches!(cfg.initial_condition, InitialCondition::Zonal { .. }) { "zonal" } else { "random" };
            kv("initial_condition", name.into());
            if let Some(c) = l_cut {
                kv("l_cut", c.to_string());
            }
        }
        InitialCondition::SingleMode { l, m } => {
            kv("initial_condition", "single".into());
            kv("ic_l", l.to_string());
            kv("ic_m", m.to_string());
        }
    }
    kv("M0", fmt_f64(cfg.m0));
    kv("k", cfg.k.to_string());
    kv("seed", cfg.seed.to_string());
    kv("diag_every", cfg.diag_every.to_string());
    kv("energy_tol", fmt_f64(cfg.energy_tol));
    kv("cfl", fmt_f64(cfg.cfl));
    kv("filter", cfg.filter.to_string());
    s
}

// ------------------------------------------------------------------ CSV

fn csv_line(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

pub fn diagnostics_csv(table: &DiagnosticsTable) -> String {
    let mut s = String::from("t,energy,enstrophy,hk_norm,zonal_fraction\n");
    for r in &table.rows {
        s += &csv_line(&[r.t, r.energy, r.enstrophy, r.hk_norm, r.zonal_fraction].map(fmt_f64));
    }
    s
}

/// Sweep rows. Wall-clock runtimes are left out so reruns are identical.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut s = String::from("omega,T,b,M0,error,energy_drift\n");
    for r in &result.rows {
        s += &csv_line(&[r.omega, r.t_final, r.b, r.m0, r.error, r.energy_drift].map(fmt_f64));
    }
    s
}

pub fn sweep_fit_csv(result: &SweepResult) -> String {
    let f = &result.fit;
    let mut s = String::from("slope,slope_half_width,intercept,n_points,k,seed\n");
    s += &csv_line(&[
        fmt_f64(f.slope),
        fmt_f64(f.slope_half_width),
        fmt_f64(f.intercept),
        f.n.to_string(),
        result.k.to_string(),
        result.seed.to_string(),
    ]);
    s
}

/// Two columns `log10 ω`, `log10 error` for plotting.
pub fn sweep_loglog(result: &SweepResult) -> String {
    let mut s = String::from("# log10(omega) log10(error)\n");
    for r in &result.rows {
        let _ = writeln!(s, "{} {}", fmt_f64(r.omega.log10()), fmt_f64(r.error.log10()));
    }
    s
}

pub fn sweep_gnuplot(data_file: &str, result: &SweepResult) -> String {
    format!(
        "set xlabel 'log10 omega'\nset ylabel 'log10 error'\nset key top right\n\
         plot '{data_file}' using 1:2 with linespoints title 'measured', \
         {} + {}*x title 'fit (slope {:.3})'\n",
        result.fit.intercept / std::f64::consts::LN_10,
        result.fit.slope,
        result.fit.slope
    )
}

pub fn continuation_csv(rows: &[ContinuationRow]) -> String {
    let mut s = String::from("b,eigdev,gapratio,commres,lowest_eigenvalues\n");
    for r in rows {
        let eig: Vec<String> = r.lowest_eigenvalues.iter().map(|v| fmt_f64(*v)).collect();
        s += &csv_line(&[
            fmt_f64(r.b),
            fmt_f64(r.eigen_deviation),
            fmt_f64(r.gap_ratio),
            fmt_f64(r.commutation_residual),
            eig.join(" "),
        ]);
    }
    s
}

pub fn toy_csv(report: &ToyAveragingReport) -> String {
    let mut s = String::from("seed,omega,T,lhs,rhs,M,M_prime,holds\n");
    for r in &report.rows {
        s += &csv_line(&[
            r.seed.to_string(),
            fmt_f64(r.omega),
            fmt_f64(r.t_final),
            fmt_f64(r.lhs),
            fmt_f64(r.rhs),
            fmt_f64(r.max_u),
            fmt_f64(r.max_f),
            r.holds().to_string(),
        ]);
    }
    s
}

// --------------------------------------------------------------- binary

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|x| self.f64(*x));
    }
    fn complex(&mut self, v: &[Complex64]) {
        v.iter().for_each(|c| {
            self.f64(c.re);
            self.f64(c.im);
        });
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Format(format!("truncated file: need {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn complex(&mut self, n: usize) -> Result<Vec<Complex64>> {
        (0..n).map(|_| Ok(Complex64::new(self.f64()?, self.f64()?))).collect()
    }
    fn header(&mut self, magic: &[u8; 8]) -> Result<()> {
        if self.take(8)? != magic {
            return Err(Error::Format(format!("bad magic, expected {}", String::from_utf8_lossy(magic))));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        if self.u32()? != ENDIAN_TAG {
            return Err(Error::Format("endianness tag mismatch".into()));
        }
        Ok(())
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn header(w: &mut Writer, magic: &[u8; 8]) {
    w.0.extend_from_slice(magic);
    w.u32(FORMAT_VERSION);
    w.u32(ENDIAN_TAG);
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidParameter(format!("{what} = {v} does not fit the file format")))
}

pub fn encode_basis(basis: &Basis) -> Result<Vec<u8>> {
    let g = basis.geometry();
    let mut w = Writer(Vec::new());
    header(&mut w, BASIS_MAGIC);
    w.f64(g.b);
    w.u32(to_u32(basis.l_max(), "l_max")?);
    w.u32(to_u32(g.n_theta, "n_theta")?);
    w.u32(to_u32(g.n_phi, "n_phi")?);
    for t in basis.tables() {
        w.u32(to_u32(t.n_modes(), "n_modes")?);
        w.f64s(&t.eigenvalues);
        w.f64s(&t.values);
        w.f64s(&t.dtheta);
    }
    Ok(w.0)
}

pub fn decode_basis(bytes: &[u8]) -> Result<Basis> {
    let mut r = Reader { buf: bytes, pos: 0 };
    r.header(BASIS_MAGIC)?;
    let b = r.f64()?;
    let l_max = r.u32()? as usize;
    let n_theta = r.u32()? as usize;
    let n_phi = r.u32()? as usize;
    let geometry = Geometry::new(b, n_theta, n_phi).map_err(|e| Error::Format(format!("bad geometry: {e}")))?;
    let mut tables = Vec::with_capacity(l_max + 1);
    for m in 0..=l_max {
        let n = r.u32()? as usize;
        let expected = l_max + 1 - m.max(1);
        if n != expected {
            return Err(Error::Format(format!("m = {m}: {n} modes, expected {expected}")));
        }
        let eigenvalues = r.f64s(n)?;
        let values = r.f64s(n_theta * n)?;
        let dtheta = r.f64s(n_theta * n)?;
        tables.push(make_table(&geometry, m, eigenvalues, values, dtheta));
    }
    r.finish()?;
    Ok(Basis::from_tables(geometry, l_max, tables))
}

pub fn save_basis(path: &Path, basis: &Basis) -> Result<()> {
    fs::write(path, encode_basis(basis)?)?;
    Ok(())
}

pub fn load_basis(path: &Path) -> Result<Basis> {
    decode_basis(&fs::read(path)?)
}

/// Everything needed to resume a run bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub dt: f64,
    pub state: SolverState,
}

pub fn encode_checkpoint(cp: &Checkpoint) -> Result<Vec<u8>> {
    let mut w = Writer(Vec::new());
    header(&mut w, CHECKPOINT_MAGIC);
    let text = format_config(&cp.config);
    w.u64(text.len() as u64);
    w.0.extend_from_slice(text.as_bytes());
    w.f64(cp.state.t);
    w.u64(cp.state.step_count);
    w.f64(cp.dt);
    w.u32(to_u32(cp.state.zeta.l_max(), "l_max")?);
    w.u64(cp.state.zeta.coeffs().len() as u64);
    w.complex(cp.state.zeta.coeffs());
    w.complex(cp.state.psi_integral.coeffs());
    Ok(w.0)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf: bytes, pos: 0 };
    r.header(CHECKPOINT_MAGIC)?;
    let len = r.u64()? as usize;
    let text = std::str::from_utf8(r.take(len)?).map_err(|_| Error::Format("config echo is not UTF-8".into()))?;
    let config = parse_config(text).map_err(|e| Error::Format(format!("config echo: {e}")))?;
    let t = r.f64()?;
    let step_count = r.u64()?;
    let dt = r.f64()?;
    let l_max = r.u32()? as usize;
    let n = r.u64()? as usize;
    let zeta = SpectralScalar::from_coeffs(l_max, r.complex(n)?).map_err(|e| Error::Format(e.to_string()))?;
    let psi_integral =
        SpectralScalar::from_coeffs(l_max, r.complex(n)?).map_err(|e| Error::Format(e.to_string()))?;
    r.finish()?;
    Ok(Checkpoint { config, dt, state: SolverState { zeta, t, psi_integral, step_count } })
}

pub fn save_checkpoint(path: &Path, cp: &Checkpoint) -> Result<()> {
    fs::write(path, encode_checkpoint(cp)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}

// ------------------------------------------------------------- manifest

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn unix_time() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Record of one CLI invocation and the files it wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: String,
    pub start_unix: f64,
    pub end_unix: f64,
    /// `(file name relative to the manifest, sha256)`.
    pub outputs: Vec<(String, String)>,
}

pub const MANIFEST_NAME: &str = "manifest.txt";

impl Manifest {
    pub fn new(command: &str, seed: u64, config: String) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config,
            start_unix: unix_time(),
            end_unix: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Writes `contents` to `dir/name` and records its checksum.
    pub fn write_output(&mut self, dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        self.record(name, contents);
        Ok(path)
    }

    pub fn record(&mut self, name: &str, contents: &[u8]) {
        let sum = sha256_hex(contents);
        match self.outputs.iter_mut().find(|(n, _)| n == name) {
            Some(entry) => entry.1 = sum,
            None => self.outputs.push((name.into(), sum)),
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "version = {}", self.version);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "start_unix = {:.3}", self.start_unix);
        let _ = writeln!(s, "end_unix = {:.3}", self.end_unix);
        s += "[config]\n";
        s += &self.config;
        if !self.config.ends_with('\n') {
            s.push('\n');
        }
        s += "[outputs]\n";
        for (name, sum) in &self.outputs {
            let _ = writeln!(s, "{sum}  {name}");
        }
        s
    }

    /// Stamps the end time and writes `dir/manifest.txt`.
    pub fn finish(&mut self, dir: &Path) -> Result<PathBuf> {
        self.end_unix = unix_time();
        let path = dir.join(MANIFEST_NAME);
        fs::write(&path, self.render())?;
        Ok(path)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Manifest {
            command: String::new(),
            version: String::new(),
            seed: 0,
            config: String::new(),
            start_unix: 0.0,
            end_unix: 0.0,
            outputs: Vec::new(),
        };
        let mut section = "";
        for line in text.lines() {
            match line {
                "[config]" => section = "config",
                "[outputs]" => section = "outputs",
                _ if section == "config" => {
                    m.config += line;
                    m.config.push('\n');
                }
                _ if section == "outputs" => {
                    let (sum, name) =
                        line.split_once("  ").ok_or_else(|| Error::Format(format!("bad output line `{line}`")))?;
                    m.outputs.push((name.into(), sum.into()));
                }
                _ => {
                    let (k, v) =
                        line.split_once(" = ").ok_or_else(|| Error::Format(format!("bad header line `{line}`")))?;
                    let bad = |_| Error::Format(format!("bad value for {k}"));
                    match k {
                        "command" => m.command = v.into(),
                        "version" => m.version = v.into(),
                        "seed" => m.seed = v.parse().map_err(|_| Error::Format(format!("bad value for {k}")))?,
                        "start_unix" => m.start_unix = v.parse().map_err(bad)?,
                        "end_unix" => m.end_unix = v.parse().map_err(bad)?,
                        _ => return Err(Error::Format(format!("unknown manifest key `{k}`"))),
                    }
                }
            }
        }
        Ok(m)
    }
}

/// Re-hashes every output listed in `dir/manifest.txt`; returns the names
/// whose checksum no longer matches.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let mut text = String::new();
    fs::File::open(dir.join(MANIFEST_NAME))?.read_to_string(&mut text)?;
    let m = Manifest::parse(&text)?;
    let mut bad = Vec::new();
    for (name, sum) in &m.outputs {
        let ok = fs::read(dir.join(name)).map(|b| sha256_hex(&b) == *sum).unwrap_or(false);
        if !ok {
            bad.push(name.clone());
        }
    }
    Ok(bad)
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let cfg = RunConfig {
            b: 0.85,
            omega: 123.5,
            dt: TimeStep::Fixed(1e-3),
            initial_condition: InitialCondition::SingleMode { l: 4, m: 1 },
            filter: true,
            ..Default::default()
        };
        assert_eq!(parse_config(&format_config(&cfg)).unwrap(), cfg);
        let z = RunConfig { initial_condition: InitialCondition::Zonal { l_cut: Some(7) }, ..Default::default() };
        assert_eq!(parse_config(&format_config(&z)).unwrap(), z);
    }

    #[test]
    fn config_rejects_unknown_and_duplicate_keys() {
        assert!(matches!(parse_config("b = 0.9\nbogus = 1\n"), Err(Error::Config(_))));
        assert!(matches!(parse_config("b = 0.9\nb = 0.8\n"), Err(Error::Config(_))));
        assert!(matches!(parse_config("b = zero\n"), Err(Error::Config(_))));
        assert!(matches!(parse_config("initial_condition = single\n"), Err(Error::Config(_))));
        assert!(matches!(parse_config("b = 0\n"), Err(Error::Config(_))));
        let c = parse_config("# comment\n\nomega = 50 # trailing\nT = 0.25\ndt = auto\n").unwrap();
        assert_eq!((c.omega, c.t_final, c.dt), (50.0, 0.25, TimeStep::Auto));
    }

    #[test]
    fn floats_print_with_seventeen_digits() {
        let x = 0.1f64 + 0.2;
        let s = fmt_f64(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert_eq!(s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count(), 17);
    }

    #[test]
    fn basis_file_is_byte_stable() {
        let basis = Basis::new(Geometry::new(0.8, 16, 32).unwrap(), 6).unwrap();
        let bytes = encode_basis(&basis).unwrap();
        let back = decode_basis(&bytes).unwrap();
        assert_eq!(encode_basis(&back).unwrap(), bytes);
        assert!(decode_basis(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(matches!(decode_basis(&wrong), Err(Error::Format(_))));
    }

    #[test]
    fn manifest_parses_back() {
        let mut m = Manifest::new("simulate", 7, "b = 0.9\n".into());
        m.record("a.csv", b"1,2\n");
        m.end_unix = 5.0;
        let back = Manifest::parse(&m.render()).unwrap();
        assert_eq!(back.outputs, m.outputs);
        assert_eq!(back.config, m.config);
        assert_eq!(back.seed, 7);
    }
}
