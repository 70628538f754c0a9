//! Persistence formats: `DSII-SNAP 1` snapshots (text header + raw
//! little-endian payload, bit-exact round trips), the norm-series CSV,
//! key=value run configuration and report files, and PGM heatmap export.

use std::collections::BTreeMap;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::diagnose::{NormRecord, NormSeries};
use crate::error::IoError;
use crate::integrate::{CrkCutoff, Monitors, RunConfig, Scheme, StepperConfig};
use crate::model::{gaussian_ic, line_soliton, lump, ozawa, DsParams, State};
use crate::spectral::{DealiasRule, Field, Grid2D, Repr, C64};

const SNAP_MAGIC: &str = "DSII-SNAP 1";

/// Write a state as a `DSII-SNAP 1` file.
///
/// The header is UTF-8 `key=value` text (floats at full round-trip
/// precision), the payload is `n_x * n_y` little-endian `(real, imaginary)`
/// f64 pairs, x index fastest, so a write→read round trip is bit-exact.
pub fn write_snapshot(path: &Path, state: &State) -> Result<(), IoError> {
    let g = state.psi.grid();
    let repr = match state.psi.repr() {
        Repr::Physical => "physical",
        Repr::Spectral => "spectral",
    };
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(
        w,
        "{SNAP_MAGIC}\n\
         n_x={}\nn_y={}\n\
         halfwidth_x={}\nhalfwidth_y={}\n\
         epsilon={}\nbeta={}\nrho={}\nt={}\n\
         layout=row-major-x-fastest\nendian=little\nrepr={repr}\n\n",
        g.n_x(),
        g.n_y(),
        g.halfwidth_x(),
        g.halfwidth_y(),
        state.params.epsilon,
        state.params.beta,
        state.params.rho,
        state.t,
    )?;
    let mut buf = Vec::with_capacity(16 * state.psi.values().len());
    for v in state.psi.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

fn parse_kv_block(text: &str) -> Result<BTreeMap<String, String>, IoError> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| IoError::Parse(format!("expected key=value, got '{line}'")))?;
        if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(IoError::Parse(format!("duplicate key '{}'", k.trim())));
        }
    }
    Ok(map)
}

fn take<T: std::str::FromStr>(
    map: &mut BTreeMap<String, String>,
    key: &str,
) -> Result<T, IoError>
where
    T::Err: std::fmt::Display,
{
    let raw = map
        .remove(key)
        .ok_or_else(|| IoError::Parse(format!("missing key '{key}'")))?;
    raw.parse()
        .map_err(|e| IoError::Parse(format!("key '{key}': {e}")))
}

/// Read a `DSII-SNAP 1` file back into a state.
pub fn read_snapshot(path: &Path) -> Result<State, IoError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let sep = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| IoError::Parse("missing blank line after header".into()))?;
    let header = std::str::from_utf8(&bytes[..sep])
        .map_err(|_| IoError::Parse("header is not UTF-8".into()))?;
    let payload = &bytes[sep + 2..];

    let (magic, rest) = header.split_once('\n').unwrap_or((header, ""));
    if magic.trim_end() != SNAP_MAGIC {
        return Err(IoError::Parse(format!(
            "bad magic line '{}', expected '{SNAP_MAGIC}'",
            magic.trim_end()
        )));
    }
    let mut map = parse_kv_block(rest)?;
    let n_x: usize = take(&mut map, "n_x")?;
    let n_y: usize = take(&mut map, "n_y")?;
    let halfwidth_x: f64 = take(&mut map, "halfwidth_x")?;
    let halfwidth_y: f64 = take(&mut map, "halfwidth_y")?;
    let epsilon: f64 = take(&mut map, "epsilon")?;
    let beta: f64 = take(&mut map, "beta")?;
    let rho: f64 = take(&mut map, "rho")?;
    let t: f64 = take(&mut map, "t")?;
    let layout: String = take(&mut map, "layout")?;
    let endian: String = take(&mut map, "endian")?;
    let repr: String = take(&mut map, "repr")?;
    if let Some(k) = map.keys().next() {
        return Err(IoError::Parse(format!("unknown header key '{k}'")));
    }
    if layout != "row-major-x-fastest" {
        return Err(IoError::Parse(format!("unsupported layout '{layout}'")));
    }
    if endian != "little" {
        return Err(IoError::Parse(format!("unsupported endianness '{endian}'")));
    }
    let repr = match repr.as_str() {
        "physical" => Repr::Physical,
        "spectral" => Repr::Spectral,
        other => return Err(IoError::Parse(format!("unknown repr '{other}'"))),
    };
    if payload.len() != 16 * n_x * n_y {
        return Err(IoError::Parse(format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            16 * n_x * n_y
        )));
    }

    let grid = Grid2D::new(n_x, n_y, halfwidth_x, halfwidth_y)?;
    let mut values = Vec::with_capacity(n_x * n_y);
    for chunk in payload.chunks_exact(16) {
        let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
        values.push(C64::new(re, im));
    }
    let field = Field::new(grid, repr, values)?;
    let params = DsParams::new(epsilon, beta, rho)?;
    // keep the stored representation (State::new would transform)
    Ok(State {
        t,
        psi: field,
        params,
    })
}

const SERIES_HEADER: &str = "t,linf,l2,l2_dx,l2_dy,energy,delta_e,tail_x,tail_y";

/// Write the norm series as CSV at full decimal round-trip precision.
pub fn write_series(path: &Path, series: &NormSeries) -> Result<(), IoError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{SERIES_HEADER}")?;
    for r in series.records() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.t, r.linf, r.l2, r.l2_dx, r.l2_dy, r.energy, r.delta_e, r.tail_x, r.tail_y
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Read a series CSV (strictly increasing `t` enforced).
pub fn read_series(path: &Path) -> Result<NormSeries, IoError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == SERIES_HEADER => {}
        other => {
            return Err(IoError::Parse(format!(
                "bad series header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut series = NormSeries::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(IoError::Parse(format!(
                "row {}: expected 9 columns, got {}",
                i + 2,
                cols.len()
            )));
        }
        let f = |j: usize| -> Result<f64, IoError> {
            cols[j]
                .trim()
                .parse()
                .map_err(|e| IoError::Parse(format!("row {} col {}: {e}", i + 2, j + 1)))
        };
        let record = NormRecord {
            t: f(0)?,
            linf: f(1)?,
            l2: f(2)?,
            l2_dx: f(3)?,
            l2_dy: f(4)?,
            energy: f(5)?,
            delta_e: f(6)?,
            tail_x: f(7)?,
            tail_y: f(8)?,
        };
        series
            .push_raw(record)
            .map_err(|e| IoError::Parse(e.to_string()))?;
    }
    Ok(series)
}

/// Initial-condition selector for run configuration files.
#[derive(Debug, Clone, PartialEq)]
pub enum IcSpec {
    Gaussian { eta: f64, amplitude: f64 },
    Lump { c: C64, z0: C64, v1: f64, v2: f64 },
    Ozawa { a: f64, b: f64 },
    LineSoliton { alpha: f64 },
    File { path: String },
}

/// Parsed run configuration (key=value text).
#[derive(Debug, Clone, PartialEq)]
pub struct RunFileConfig {
    pub epsilon: f64,
    pub beta: f64,
    pub rho: f64,
    pub nx: usize,
    pub ny: usize,
    pub halfwidth_x: f64,
    pub halfwidth_y: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub scheme: Scheme,
    pub dealias: DealiasRule,
    pub crk_cutoff: CrkCutoff,
    pub ic: IcSpec,
    pub snapshot_every: usize,
    pub monitors: Monitors,
    pub output_dir: String,
}

fn parse_complex(s: &str) -> Result<C64, String> {
    let (re, im) = s
        .split_once(',')
        .ok_or_else(|| format!("expected 're,im', got '{s}'"))?;
    Ok(C64::new(
        re.trim().parse().map_err(|e| format!("{e}"))?,
        im.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

impl RunFileConfig {
    /// Parse key=value text. Unknown keys are rejected; unspecified keys take
    /// the defaults of the production protocol (epsilon=0.1, halfwidth=2pi,
    /// 4096^2, n_steps=4000, t_end=0.6, ifrk4, Gaussian data). `beta` and
    /// `rho` must be given explicitly.
    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut map = parse_kv_block(text)?;
        let beta: f64 = take(&mut map, "beta")?;
        let rho: f64 = take(&mut map, "rho")?;

        let mut opt = |key: &str| map.remove(key);
        let parse_or = |raw: Option<String>, key: &str, default: f64| -> Result<f64, IoError> {
            match raw {
                Some(s) => s
                    .parse()
                    .map_err(|e| IoError::Parse(format!("key '{key}': {e}"))),
                None => Ok(default),
            }
        };
        let epsilon = parse_or(opt("epsilon"), "epsilon", 0.1)?;
        let halfwidth_x =
            parse_or(opt("halfwidth_x"), "halfwidth_x", 2.0 * std::f64::consts::PI)?;
        let halfwidth_y =
            parse_or(opt("halfwidth_y"), "halfwidth_y", 2.0 * std::f64::consts::PI)?;
        let t_end = parse_or(opt("t_end"), "t_end", 0.6)?;
        let nx = parse_or(opt("nx"), "nx", 4096.0)? as usize;
        let ny = parse_or(opt("ny"), "ny", 4096.0)? as usize;
        let n_steps = parse_or(opt("n_steps"), "n_steps", 4000.0)? as usize;
        let snapshot_every = parse_or(opt("snapshot_every"), "snapshot_every", 0.0)? as usize;

        let scheme: Scheme = match opt("scheme") {
            Some(s) => s.parse().map_err(IoError::Parse)?,
            None => Scheme::Ifrk4,
        };
        let dealias: DealiasRule = match opt("dealias") {
            Some(s) => s.parse().map_err(IoError::Parse)?,
            None => DealiasRule::None,
        };
        let crk_cutoff = match opt("crk_cutoff") {
            None => CrkCutoff::Auto,
            Some(s) if s == "auto" => CrkCutoff::Auto,
            Some(s) => CrkCutoff::Fraction(
                s.parse()
                    .map_err(|e| IoError::Parse(format!("key 'crk_cutoff': {e}")))?,
            ),
        };

        let ic_kind = opt("ic").unwrap_or_else(|| "gaussian".into());
        let ic = match ic_kind.as_str() {
            "gaussian" => IcSpec::Gaussian {
                eta: parse_or(opt("eta"), "eta", 1.0)?,
                amplitude: parse_or(opt("amplitude"), "amplitude", 1.0)?,
            },
            "lump" => IcSpec::Lump {
                c: parse_complex(&opt("c").unwrap_or_else(|| "1,0".into()))
                    .map_err(IoError::Parse)?,
                z0: parse_complex(&opt("z0").unwrap_or_else(|| "0,0".into()))
                    .map_err(IoError::Parse)?,
                v1: parse_or(opt("v1"), "v1", 0.0)?,
                v2: parse_or(opt("v2"), "v2", 0.0)?,
            },
            "ozawa" => IcSpec::Ozawa {
                a: parse_or(opt("a"), "a", 1.0)?,
                b: parse_or(opt("b"), "b", -1.0)?,
            },
            "line-soliton" => IcSpec::LineSoliton {
                alpha: parse_or(opt("alpha"), "alpha", 2.0)?,
            },
            "file" => IcSpec::File {
                path: opt("ic_file")
                    .ok_or_else(|| IoError::Parse("ic=file requires ic_file=<path>".into()))?,
            },
            other => return Err(IoError::Parse(format!("unknown ic '{other}'"))),
        };

        let delta_e_limit = match opt("delta_e_max") {
            Some(s) => Some(
                s.parse()
                    .map_err(|e| IoError::Parse(format!("key 'delta_e_max': {e}")))?,
            ),
            None => None,
        };
        let tail_limit = match opt("tail_max") {
            Some(s) => Some(
                s.parse()
                    .map_err(|e| IoError::Parse(format!("key 'tail_max': {e}")))?,
            ),
            None => None,
        };
        let singularity_stop = match opt("singularity_stop").as_deref() {
            None | Some("auto") => None,
            Some("true") => Some(true),
            Some("false") => Some(false),
            Some(other) => {
                return Err(IoError::Parse(format!(
                    "singularity_stop must be true|false|auto, got '{other}'"
                )))
            }
        };
        let output_dir = opt("output_dir").unwrap_or_else(|| ".".into());

        if let Some(k) = map.keys().next() {
            return Err(IoError::Parse(format!("unknown key '{k}'")));
        }

        Ok(Self {
            epsilon,
            beta,
            rho,
            nx,
            ny,
            halfwidth_x,
            halfwidth_y,
            t_end,
            n_steps,
            scheme,
            dealias,
            crk_cutoff,
            ic,
            snapshot_every,
            monitors: Monitors {
                delta_e_limit,
                tail_limit,
                singularity_stop,
            },
            output_dir,
        })
    }

    /// Assemble the run and stepper configurations (builds the grid and the
    /// initial data; `ic=file` loads the referenced snapshot).
    pub fn build(&self) -> Result<(RunConfig, StepperConfig), IoError> {
        let grid = Grid2D::new(self.nx, self.ny, self.halfwidth_x, self.halfwidth_y)?;
        let params = DsParams::new(self.epsilon, self.beta, self.rho)?;
        let (t0, psi) = match &self.ic {
            IcSpec::Gaussian { eta, amplitude } => (0.0, gaussian_ic(grid, *eta, *amplitude)?),
            IcSpec::Lump { c, z0, v1, v2 } => (0.0, lump(grid, *c, *z0, *v1, *v2, 0.0)?),
            IcSpec::Ozawa { a, b } => (0.0, ozawa(grid, *a, *b, 0.0)?),
            IcSpec::LineSoliton { alpha } => (0.0, line_soliton(grid, *alpha)?),
            IcSpec::File { path } => {
                let s = read_snapshot(Path::new(path))?;
                if s.psi.grid() != grid {
                    return Err(IoError::Parse(format!(
                        "snapshot grid of '{path}' does not match the configured grid"
                    )));
                }
                (s.t, s.psi)
            }
        };
        let state = State::new(t0, psi, params)?;
        let dt = (self.t_end - t0) / self.n_steps as f64;
        let stepper = StepperConfig {
            scheme: self.scheme,
            dt,
            dealias: self.dealias,
            crk_cutoff: self.crk_cutoff,
        };
        Ok((
            RunConfig {
                state,
                t_end: self.t_end,
                n_steps: self.n_steps,
                snapshot_every: self.snapshot_every,
                monitors: self.monitors,
            },
            stepper,
        ))
    }
}

/// Write a key=value report file.
pub fn write_report(path: &Path, entries: &[(&str, String)]) -> Result<(), IoError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for (k, v) in entries {
        writeln!(w, "{k}={v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Export `|psi|` as an 8-bit P5 PGM (linear scale, max-normalized; a zero
/// field maps to an all-zero image) and a CSV of the raw `|psi|` values.
/// Image row `j` is grid row `k_y = j`.
pub fn write_heatmap(
    pgm_path: &Path,
    csv_path: &Path,
    field: &Field,
) -> Result<(), IoError> {
    let phys = match field.repr() {
        Repr::Physical => field.clone(),
        Repr::Spectral => field.to_physical()?,
    };
    let g = phys.grid();
    let max = phys.norm_linf();
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };

    let mut w = BufWriter::new(std::fs::File::create(pgm_path)?);
    write!(w, "P5\n{} {}\n255\n", g.n_x(), g.n_y())?;
    let mut row = Vec::with_capacity(g.n_x());
    let mut csv = BufWriter::new(std::fs::File::create(csv_path)?);
    for k_y in 0..g.n_y() {
        row.clear();
        for k_x in 0..g.n_x() {
            let a = phys.values()[g.index(k_x, k_y)].norm();
            row.push((a * scale).round().clamp(0.0, 255.0) as u8);
            if k_x > 0 {
                write!(csv, ",")?;
            }
            write!(csv, "{a}")?;
        }
        writeln!(csv)?;
        w.write_all(&row)?;
    }
    w.flush()?;
    csv.flush()?;
    Ok(())
}
