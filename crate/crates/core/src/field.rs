//! Periodic 3-D flow snapshots: analytic and random solenoidal generators and
//! the `.vfld` text format.
//!
//! Node `(i, j, k)` sits at `(i·hx, j·hy, k·hz)` and is stored at flat index
//! `i + nx·(j + ny·k)` (x fastest). Every axis wraps around.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::nsops::{self, VectorField};
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Smallest node count per axis; central stencils need two distinct neighbors.
pub const MIN_NODES: usize = 4;

/// Random Fourier modes per potential component in [`random_solenoidal_snapshot`].
pub const POTENTIAL_MODES: usize = 8;

/// Largest integer wavenumber drawn for a random mode.
const MAX_WAVENUMBER: i64 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3 {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
}

impl Grid3 {
    pub fn new(nx: usize, ny: usize, nz: usize, lx: f64, ly: f64, lz: f64) -> Result<Self> {
        for (axis, n) in [("x", nx), ("y", ny), ("z", nz)] {
            if n < MIN_NODES {
                return Err(Error::InvalidGrid(format!(
                    "n{axis} = {n}, need at least {MIN_NODES}"
                )));
            }
        }
        for (axis, l) in [("x", lx), ("y", ly), ("z", lz)] {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("l{axis} = {l}, need a positive length")));
            }
        }
        Ok(Self {
            nx,
            ny,
            nz,
            lx,
            ly,
            lz,
        })
    }

    /// `n³` nodes on the `[0, 2π)³` box.
    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n, TAU, TAU, TAU)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn lengths(&self) -> [f64; 3] {
        [self.lx, self.ly, self.lz]
    }

    /// Node spacing `[hx, hy, hz]`.
    pub fn spacing(&self) -> [f64; 3] {
        [
            self.lx / self.nx as f64,
            self.ly / self.ny as f64,
            self.lz / self.nz as f64,
        ]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / (self.nx * self.ny);
        (i, j, k)
    }

    /// Physical position of node `idx`.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.coords(idx);
        let [hx, hy, hz] = self.spacing();
        [i as f64 * hx, j as f64 * hy, k as f64 * hz]
    }

    /// Evaluate `f(x, y, z)` at every node in storage order.
    pub fn sample(&self, mut f: impl FnMut(f64, f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let [x, y, z] = self.position(idx);
                f(x, y, z)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSnapshot {
    pub grid: Grid3,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub p: Vec<f64>,
    pub t_field: Vec<f64>,
    /// Global Reynolds number.
    pub re: f64,
    /// Prandtl number; carried as an input feature only.
    pub pr: f64,
}

impl FlowSnapshot {
    /// Assemble a snapshot, checking array sizes, finiteness and `re, pr > 0`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: Grid3,
        u: Vec<f64>,
        v: Vec<f64>,
        w: Vec<f64>,
        p: Vec<f64>,
        t_field: Vec<f64>,
        re: f64,
        pr: f64,
    ) -> Result<Self> {
        check_physics(re, pr)?;
        let n = grid.len();
        for (name, arr) in [("u", &u), ("v", &v), ("w", &w), ("p", &p), ("T", &t_field)] {
            if arr.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "{name} has {} entries, grid has {n} nodes",
                    arr.len()
                )));
            }
            if let Some(pos) = arr.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name}[{pos}] is not finite"
                )));
            }
        }
        Ok(Self {
            grid,
            u,
            v,
            w,
            p,
            t_field,
            re,
            pr,
        })
    }

    pub fn velocity(&self) -> VectorField {
        VectorField {
            grid: self.grid,
            comps: [self.u.clone(), self.v.clone(), self.w.clone()],
        }
    }

    pub fn pressure(&self) -> nsops::ScalarField {
        nsops::ScalarField {
            grid: self.grid,
            data: self.p.clone(),
        }
    }

    /// Largest velocity component magnitude over the grid.
    pub fn max_velocity(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.v)
            .chain(&self.w)
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

fn check_physics(re: f64, pr: f64) -> Result<()> {
    if !(re.is_finite() && re > 0.0) {
        return Err(Error::InvalidArgument(format!("re = {re}, must be positive")));
    }
    if !(pr.is_finite() && pr > 0.0) {
        return Err(Error::InvalidArgument(format!("pr = {pr}, must be positive")));
    }
    Ok(())
}

fn tg_temperature(grid: &Grid3) -> Vec<f64> {
    let (kx, ky, kz) = (TAU / grid.lx, TAU / grid.ly, TAU / grid.lz);
    grid.sample(|x, y, z| (kx * x).cos() * (ky * y).cos() * (kz * z).cos())
}

/// Taylor-Green vortex cell, one wavelength per axis.
///
/// Solenoidal when `lx == ly`; on other aspect ratios the x and y wavenumbers
/// differ and the continuity equation no longer holds.
pub fn taylor_green_snapshot(grid: Grid3, re: f64, pr: f64) -> Result<FlowSnapshot> {
    let grid = Grid3::new(grid.nx, grid.ny, grid.nz, grid.lx, grid.ly, grid.lz)?;
    let (kx, ky) = (TAU / grid.lx, TAU / grid.ly);
    let u = grid.sample(|x, y, _| (kx * x).cos() * (ky * y).sin());
    let v = grid.sample(|x, y, _| -(kx * x).sin() * (ky * y).cos());
    let w = vec![0.0; grid.len()];
    let p = grid.sample(|x, y, _| -0.25 * ((2.0 * kx * x).cos() + (2.0 * ky * y).cos()));
    let t_field = tg_temperature(&grid);
    FlowSnapshot::new(grid, u, v, w, p, t_field, re, pr)
}

/// Arnold-Beltrami-Childress flow on the `[0, 2π)³` box.
///
/// Its vorticity equals its velocity, so with `p = -|u|²/2` the steady
/// convective term and pressure gradient cancel exactly.
pub fn abc_snapshot(grid: Grid3, a: f64, b: f64, c: f64, re: f64, pr: f64) -> Result<FlowSnapshot> {
    let grid = Grid3::new(grid.nx, grid.ny, grid.nz, grid.lx, grid.ly, grid.lz)?;
    for (axis, l) in [("x", grid.lx), ("y", grid.ly), ("z", grid.lz)] {
        if (l - TAU).abs() > 1e-12 {
            return Err(Error::InvalidGrid(format!(
                "ABC flow needs a 2π domain, l{axis} = {l}"
            )));
        }
    }
    let u = grid.sample(|_, y, z| a * z.sin() + c * y.cos());
    let v = grid.sample(|x, _, z| b * x.sin() + a * z.cos());
    let w = grid.sample(|x, y, _| c * y.sin() + b * x.cos());
    let p = (0..grid.len())
        .map(|n| -0.5 * (u[n] * u[n] + v[n] * v[n] + w[n] * w[n]))
        .collect();
    let t_field = tg_temperature(&grid);
    FlowSnapshot::new(grid, u, v, w, p, t_field, re, pr)
}

/// One periodic Fourier mode `coef · sin(2π k·x/L + phase)`.
#[derive(Debug, Clone, Copy)]
struct Mode {
    k: [i64; 3],
    coef: f64,
    phase: f64,
}

impl Mode {
    fn draw(rng: &mut SplitMix64) -> Self {
        let span = (2 * MAX_WAVENUMBER + 1) as u64;
        let k = loop {
            let k = [0; 3].map(|_: i64| rng.below(span) as i64 - MAX_WAVENUMBER);
            if k != [0, 0, 0] {
                break k;
            }
        };
        let norm = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
        Mode {
            k,
            coef: rng.uniform(-1.0, 1.0) / norm,
            phase: rng.uniform(0.0, TAU),
        }
    }

    fn eval(&self, grid: &Grid3, pos: [f64; 3]) -> f64 {
        let arg: f64 = (0..3)
            .map(|a| TAU * self.k[a] as f64 * pos[a] / grid.lengths()[a])
            .sum();
        self.coef * (arg + self.phase).sin()
    }
}

/// Velocity = discrete curl of a seeded random vector potential.
///
/// Each potential component is a sum of [`POTENTIAL_MODES`] random modes
/// scaled by `amplitude`; pressure and temperature are one random mode each.
/// Because central differences along different axes commute, the discrete
/// divergence of the result vanishes up to rounding.
pub fn random_solenoidal_snapshot(
    grid: Grid3,
    seed: u64,
    amplitude: f64,
    re: f64,
    pr: f64,
) -> Result<FlowSnapshot> {
    let grid = Grid3::new(grid.nx, grid.ny, grid.nz, grid.lx, grid.ly, grid.lz)?;
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "amplitude = {amplitude}, must be non-negative"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let potential_modes: Vec<Vec<Mode>> = (0..3)
        .map(|_| (0..POTENTIAL_MODES).map(|_| Mode::draw(&mut rng)).collect())
        .collect();
    let p_mode = Mode::draw(&mut rng);
    let t_mode = Mode::draw(&mut rng);

    let comps = [0, 1, 2].map(|c| {
        (0..grid.len())
            .map(|idx| {
                let pos = grid.position(idx);
                amplitude * potential_modes[c].iter().map(|m| m.eval(&grid, pos)).sum::<f64>()
            })
            .collect::<Vec<_>>()
    });
    let potential = VectorField { grid, comps };
    let [u, v, w] = nsops::curl(&potential).comps;
    let p = (0..grid.len()).map(|n| p_mode.eval(&grid, grid.position(n))).collect();
    let t_field = (0..grid.len()).map(|n| t_mode.eval(&grid, grid.position(n))).collect();
    FlowSnapshot::new(grid, u, v, w, p, t_field, re, pr)
}

/// Write the `.vfld` text format with 17 significant digits per value.
pub fn save_snapshot(s: &FlowSnapshot, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_snapshot(s)).map_err(|e| Error::io(path, e))
}

pub fn format_snapshot(s: &FlowSnapshot) -> String {
    let g = &s.grid;
    let mut out = String::with_capacity(g.len() * 5 * 25 + 128);
    out.push_str("#vfld 1\n");
    let _ = writeln!(
        out,
        "#grid {} {} {} {:.16e} {:.16e} {:.16e}",
        g.nx, g.ny, g.nz, g.lx, g.ly, g.lz
    );
    let _ = writeln!(out, "#phys {:.16e} {:.16e}", s.re, s.pr);
    for n in 0..g.len() {
        let _ = writeln!(
            out,
            "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
            s.u[n], s.v[n], s.w[n], s.p[n], s.t_field[n]
        );
    }
    out
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<FlowSnapshot> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_snapshot(&text, path)
}

/// Parse `.vfld` text; `origin` is only used in error messages.
pub fn parse_snapshot(text: &str, origin: impl AsRef<Path>) -> Result<FlowSnapshot> {
    let origin = origin.as_ref();
    let err = |line: usize, msg: String| Error::parse(origin, line, msg);
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    let mut header = |tag: &str| -> Result<Vec<&str>> {
        match lines.next() {
            Some((no, l)) => {
                let mut toks = l.split_whitespace();
                if toks.next() != Some(tag) {
                    return Err(err(no, format!("expected `{tag}` header, found `{l}`")));
                }
                Ok(toks.collect())
            }
            None => Err(err(0, format!("empty or truncated file, missing `{tag}` header"))),
        }
    };

    let version = header("#vfld")?;
    if version != ["1"] {
        return Err(err(1, format!("unsupported version {version:?}")));
    }
    let grid_toks = header("#grid")?;
    if grid_toks.len() != 6 {
        return Err(err(2, format!("expected 6 grid values, found {}", grid_toks.len())));
    }
    let mut dims = [0usize; 3];
    for (d, tok) in dims.iter_mut().zip(&grid_toks[..3]) {
        *d = tok
            .parse()
            .map_err(|_| err(2, format!("bad node count `{tok}`")))?;
    }
    let mut lens = [0f64; 3];
    for (l, tok) in lens.iter_mut().zip(&grid_toks[3..]) {
        *l = parse_real(tok).ok_or_else(|| err(2, format!("bad length `{tok}`")))?;
    }
    let grid = Grid3::new(dims[0], dims[1], dims[2], lens[0], lens[1], lens[2])
        .map_err(|e| err(2, e.to_string()))?;

    let phys = header("#phys")?;
    if phys.len() != 2 {
        return Err(err(3, format!("expected `re pr`, found {} values", phys.len())));
    }
    let re = parse_real(phys[0]).ok_or_else(|| err(3, format!("bad re `{}`", phys[0])))?;
    let pr = parse_real(phys[1]).ok_or_else(|| err(3, format!("bad pr `{}`", phys[1])))?;
    check_physics(re, pr).map_err(|e| err(3, e.to_string()))?;

    let n = grid.len();
    let mut cols: [Vec<f64>; 5] = std::array::from_fn(|_| Vec::with_capacity(n));
    let mut rows = 0usize;
    let mut last_line = 3;
    for (no, l) in lines {
        last_line = no;
        if l.is_empty() {
            continue;
        }
        if rows == n {
            return Err(err(no, format!("expected {n} data rows, found more")));
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(err(no, format!("expected 5 values `u v w p T`, found {}", toks.len())));
        }
        for (col, tok) in cols.iter_mut().zip(&toks) {
            let x = parse_real(tok)
                .ok_or_else(|| err(no, format!("bad or non-finite value `{tok}`")))?;
            col.push(x);
        }
        rows += 1;
    }
    if rows != n {
        return Err(err(
            last_line,
            format!("expected {n} data rows for a {}x{}x{} grid, found {rows}", dims[0], dims[1], dims[2]),
        ));
    }
    let [u, v, w, p, t_field] = cols;
    FlowSnapshot::new(grid, u, v, w, p, t_field, re, pr)
}

fn parse_real(tok: &str) -> Option<f64> {
    tok.parse::<f64>().ok().filter(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn grid_rejects_small_counts_and_bad_lengths() {
        assert!(Grid3::new(3, 4, 4, 1.0, 1.0, 1.0).is_err());
        assert!(Grid3::new(4, 4, 4, 0.0, 1.0, 1.0).is_err());
        assert!(Grid3::new(4, 4, 4, 1.0, f64::NAN, 1.0).is_err());
        assert!(Grid3::new(4, 4, 4, 1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid3::new(4, 5, 6, 1.0, 1.0, 1.0).unwrap();
        for idx in 0..g.len() {
            let (i, j, k) = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 4);
        assert_eq!(g.index(0, 0, 1), 20);
    }

    #[test]
    fn taylor_green_point_values() {
        let g = Grid3::cube(16).unwrap();
        let s = taylor_green_snapshot(g, 100.0, 0.7).unwrap();
        let o = g.index(0, 0, 0);
        assert_eq!((s.u[o], s.v[o], s.w[o]), (0.0, 0.0, 0.0));
        // y = π/2 is node j = 4 when h = 2π/16
        let q = g.index(0, 4, 0);
        assert!(approx(s.u[q], 1.0, 1e-15));
        assert!(approx(s.v[q], 0.0, 1e-15));
    }

    #[test]
    fn taylor_green_analytic_divergence_cancels() {
        let g = Grid3::cube(8).unwrap();
        for idx in 0..g.len() {
            let [x, y, _] = g.position(idx);
            let du_dx = -x.sin() * y.sin();
            let dv_dy = x.sin() * y.sin();
            assert!(approx(du_dx + dv_dy, 0.0, 1e-15));
        }
    }

    #[test]
    fn abc_point_values_and_zero_case() {
        let g = Grid3::cube(8).unwrap();
        let s = abc_snapshot(g, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let o = g.index(0, 0, 0);
        assert_eq!((s.u[o], s.v[o], s.w[o]), (1.0, 1.0, 1.0));
        let z = abc_snapshot(g, 0.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(z.max_velocity(), 0.0);
    }

    #[test]
    fn abc_analytic_laplacian_is_minus_velocity() {
        // second derivatives of a sin z + c cos y are -a sin z and -c cos y
        let g = Grid3::cube(8).unwrap();
        let s = abc_snapshot(g, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        for idx in 0..g.len() {
            let [x, y, z] = g.position(idx);
            let lap_u = -z.sin() - y.cos();
            let lap_v = -x.sin() - z.cos();
            let lap_w = -y.sin() - x.cos();
            assert!(approx(lap_u, -s.u[idx], 1e-14));
            assert!(approx(lap_v, -s.v[idx], 1e-14));
            assert!(approx(lap_w, -s.w[idx], 1e-14));
        }
    }

    #[test]
    fn abc_rejects_non_two_pi_domain() {
        let g = Grid3::new(8, 8, 8, 1.0, TAU, TAU).unwrap();
        assert!(matches!(
            abc_snapshot(g, 1.0, 1.0, 1.0, 1.0, 1.0),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn generators_reject_bad_physics() {
        let g = Grid3::cube(4).unwrap();
        assert!(taylor_green_snapshot(g, 0.0, 1.0).is_err());
        assert!(taylor_green_snapshot(g, 1.0, -1.0).is_err());
        assert!(random_solenoidal_snapshot(g, 1, 1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn random_snapshot_deterministic_and_zero_amplitude() {
        let g = Grid3::cube(8).unwrap();
        let a = random_solenoidal_snapshot(g, 42, 1.0, 100.0, 0.7).unwrap();
        let b = random_solenoidal_snapshot(g, 42, 1.0, 100.0, 0.7).unwrap();
        assert_eq!(a, b);
        let c = random_solenoidal_snapshot(g, 43, 1.0, 100.0, 0.7).unwrap();
        assert_ne!(a.u, c.u);
        let z = random_solenoidal_snapshot(g, 42, 0.0, 100.0, 0.7).unwrap();
        assert_eq!(z.max_velocity(), 0.0);
    }

    #[test]
    fn random_snapshot_is_discretely_solenoidal() {
        let g = Grid3::cube(16).unwrap();
        let s = random_solenoidal_snapshot(g, 9, 1.0, 100.0, 0.7).unwrap();
        let div = nsops::divergence(&s.velocity());
        assert!(s.max_velocity() > 0.1);
        assert!(div.max_abs() <= 1e-12 * s.max_velocity());
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.vfld");
        let s = random_solenoidal_snapshot(Grid3::cube(4).unwrap(), 5, 1.3, 250.0, 0.71).unwrap();
        save_snapshot(&s, &path).unwrap();
        let back = load_snapshot(&path).unwrap();
        assert_eq!(back.grid, s.grid);
        for (a, b) in [(&s.u, &back.u), (&s.v, &back.v), (&s.w, &back.w), (&s.p, &back.p), (&s.t_field, &back.t_field)] {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-15);
            }
        }
        assert_eq!((back.re, back.pr), (s.re, s.pr));
    }

    #[test]
    fn short_file_names_expected_rows() {
        let s = taylor_green_snapshot(Grid3::cube(4).unwrap(), 1.0, 1.0).unwrap();
        let text = format_snapshot(&s);
        let truncated: Vec<&str> = text.lines().take(3 + 63).collect();
        let e = parse_snapshot(&truncated.join("\n"), "t.vfld").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("expected 64"), "{msg}");
    }

    #[test]
    fn malformed_inputs_are_parse_errors() {
        let e = parse_snapshot("", "empty.vfld").unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));

        let e = parse_snapshot("#vfld 1\n#grid 4 4 x 1 1 1\n", "g.vfld").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");

        let s = taylor_green_snapshot(Grid3::cube(4).unwrap(), 1.0, 1.0).unwrap();
        let text = format_snapshot(&s).replacen("0.0000000000000000e0 ", "NaN ", 1);
        let e = parse_snapshot(&text, "nan.vfld").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e}");
    }
}
