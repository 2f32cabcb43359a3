//! Circuit layouts (brickwork, extended brickwork, cluster state with
//! Haar-random measurements), concrete instances and lightcones.
//!
//! Brickwork on a 6x4 patch, rows top to bottom, columns left to right.
//! `P` marks a layer-1 vertical gate between the site and the one below,
//! `O` a layer-2 vertical gate, `-G-` a layer-3 horizontal gate.
//!
//! ```text
//!        col 0   col 1   col 2   col 3
//! row 0   o -G-   o       o -G-   o          O under every column
//!         O       O       O       O
//! row 1   o       o -G-   o       o -G-
//!         P               P                  P at even columns
//! row 2   o -G-   o       o -G-   o
//!         O       O       O       O
//! row 3   o       o -G-   o       o -G-
//!                 P               P          P at odd columns
//! row 4   o -G-   o       o -G-   o
//!         O       O       O       O
//! row 5   o       o -G-   o       o -G-
//! ```
//!
//! Layer 1 couples rows `(i, i+1)` in column `j` when `i = 1 + 2 (j mod 2)`
//! modulo 4, layer 2 couples rows `(i, i+1)` for every even `i`, and layer 3
//! couples columns `(j, j+1)` in row `i` when `j = i` modulo 2. Gates that
//! would leave the lattice are dropped. After integrating out the layer-1
//! and layer-3 nodes, the k=2 spin model of this layout is a brick wall with
//! horizontal bonds everywhere and vertical bonds on every other column.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{haar_unitary, ComplexTensor, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub row: usize,
    pub col: usize,
}

impl Site {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Infinity-norm lattice distance.
    pub fn dist(&self, other: &Site) -> usize {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    HaarTwoSite,
    HaarOneSite,
    Cz,
    HadamardLikeFixed,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::HaarTwoSite | GateKind::Cz => 2,
            GateKind::HaarOneSite | GateKind::HadamardLikeFixed => 1,
        }
    }

    pub fn is_diagonal(self) -> bool {
        matches!(self, GateKind::Cz)
    }

    pub fn is_random(self) -> bool {
        matches!(self, GateKind::HaarTwoSite | GateKind::HaarOneSite)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateEvent {
    /// 1-based time step.
    pub layer: usize,
    pub sites: Vec<Site>,
    pub kind: GateKind,
}

impl GateEvent {
    pub fn new(layer: usize, sites: Vec<Site>, kind: GateKind) -> Self {
        Self { layer, sites, kind }
    }

    pub fn is_vertical(&self) -> bool {
        self.sites.len() == 2 && self.sites[0].col == self.sites[1].col
    }

    pub fn is_horizontal(&self) -> bool {
        self.sites.len() == 2 && self.sites[0].row == self.sites[1].row
    }

    pub fn min_col(&self) -> usize {
        self.sites.iter().map(|s| s.col).min().unwrap_or(0)
    }

    pub fn max_col(&self) -> usize {
        self.sites.iter().map(|s| s.col).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitLayout {
    pub rows: usize,
    pub cols: usize,
    pub q: usize,
    pub events: Vec<GateEvent>,
    pub depth: usize,
}

impl CircuitLayout {
    /// Validates locality, layer order and disjointness within layers.
    pub fn new(rows: usize, cols: usize, q: usize, events: Vec<GateEvent>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("empty lattice".into()));
        }
        if q < 2 {
            return Err(Error::InvalidArgument(format!("local dimension {q} < 2")));
        }
        let mut last_layer = 0;
        let mut used: BTreeSet<Site> = BTreeSet::new();
        for (idx, ev) in events.iter().enumerate() {
            if ev.layer == 0 {
                return Err(Error::InvalidArgument(format!("event {idx} has layer 0")));
            }
            if ev.sites.len() != ev.kind.arity() {
                return Err(Error::InvalidArgument(format!(
                    "event {idx}: {:?} acts on {} sites",
                    ev.kind,
                    ev.sites.len()
                )));
            }
            for s in &ev.sites {
                if s.row >= rows || s.col >= cols {
                    return Err(Error::InvalidArgument(format!("event {idx}: site {s:?} off lattice")));
                }
            }
            if ev.sites.len() == 2 {
                let (a, b) = (ev.sites[0], ev.sites[1]);
                let manhattan = a.row.abs_diff(b.row) + a.col.abs_diff(b.col);
                if manhattan != 1 {
                    return Err(Error::InvalidArgument(format!(
                        "event {idx}: sites {a:?} and {b:?} are not adjacent"
                    )));
                }
            }
            if ev.layer < last_layer {
                return Err(Error::InvalidArgument("events are not sorted by layer".into()));
            }
            if ev.layer > last_layer {
                used.clear();
                last_layer = ev.layer;
            }
            for s in &ev.sites {
                if !used.insert(*s) {
                    return Err(Error::InvalidArgument(format!(
                        "event {idx}: site {s:?} used twice in layer {}",
                        ev.layer
                    )));
                }
            }
        }
        Ok(Self { rows, cols, q, depth: last_layer, events })
    }

    pub fn n_sites(&self) -> usize {
        self.rows * self.cols
    }

    pub fn site_index(&self, s: Site) -> usize {
        s.row * self.cols + s.col
    }

    pub fn site_at(&self, index: usize) -> Site {
        Site::new(index / self.cols, index % self.cols)
    }

    pub fn sites(&self) -> Vec<Site> {
        (0..self.n_sites()).map(|i| self.site_at(i)).collect()
    }

    pub fn untouched_sites(&self) -> Vec<Site> {
        let touched: BTreeSet<Site> = self.events.iter().flat_map(|e| e.sites.iter().copied()).collect();
        self.sites().into_iter().filter(|s| !touched.contains(s)).collect()
    }
}

fn brick_events(rows: usize, cols: usize, vertical_cols: impl Fn(usize) -> Option<usize>, stretch: impl Fn(usize, usize) -> bool) -> Vec<GateEvent> {
    // `vertical_cols(j)` is the parity (0 or 1) of column j inside its pair
    // of vertical-gate columns, or None for a stretch column.
    let mut ev = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            match vertical_cols(j) {
                Some(par) => {
                    if i + 1 < rows && i % 4 == (1 + 2 * par) % 4 {
                        ev.push(GateEvent::new(1, vec![Site::new(i, j), Site::new(i + 1, j)], GateKind::HaarTwoSite));
                    }
                }
                None => {
                    if j + 1 < cols && stretch(j, j + 1) && j % 2 == (i + 1) % 2 {
                        ev.push(GateEvent::new(1, vec![Site::new(i, j), Site::new(i, j + 1)], GateKind::HaarTwoSite));
                    }
                }
            }
        }
    }
    for i in (0..rows.saturating_sub(1)).step_by(2) {
        for j in 0..cols {
            if vertical_cols(j).is_some() {
                ev.push(GateEvent::new(2, vec![Site::new(i, j), Site::new(i + 1, j)], GateKind::HaarTwoSite));
            }
        }
    }
    for i in 0..rows {
        for j in 0..cols.saturating_sub(1) {
            if j % 2 == i % 2 {
                ev.push(GateEvent::new(3, vec![Site::new(i, j), Site::new(i, j + 1)], GateKind::HaarTwoSite));
            }
        }
    }
    ev
}

/// Depth-3 brickwork on an `l1 x l2` lattice of qudits of dimension `q`.
pub fn brickwork_layout(l1: usize, l2: usize, q: usize) -> Result<CircuitLayout> {
    if l1 < 2 || l2 < 2 {
        return Err(Error::InvalidArgument(format!("brickwork needs at least 2x2, got {l1}x{l2}")));
    }
    let ev = brick_events(l1, l2, |j| Some(j % 2), |_, _| false);
    CircuitLayout::new(l1, l2, q, ev)
}

/// Extended brickwork with `v` blocks of `2r` columns each. The first two
/// columns of a block carry the vertical gates of layers 1 and 2 exactly as
/// in [`brickwork_layout`]; in the remaining `2r - 2` columns layer 1 is
/// horizontal instead (pairs `(j, j+1)` with `j + 1 = i` mod 2, both inside
/// the stretch), which together with layer 3 forms a depth-2 1D brickwork
/// along each row. `r = 1` gives `brickwork_layout(l, 2v, q)`.
pub fn extended_brickwork_layout(l: usize, r: usize, v: usize, q: usize) -> Result<CircuitLayout> {
    if l < 2 || r < 1 || v < 1 {
        return Err(Error::InvalidArgument(format!("extended brickwork needs L>=2, r>=1, v>=1 (got {l}, {r}, {v})")));
    }
    let w = 2 * r;
    let cols = w * v;
    let ev = brick_events(
        l,
        cols,
        |j| if j % w < 2 { Some(j % w) } else { None },
        |a, b| a % w >= 2 && b % w >= 2 && a / w == b / w,
    );
    CircuitLayout::new(l, cols, q, ev)
}

/// Cluster state on an `l x l` qubit grid followed by one Haar-random
/// single-qubit gate per site (a measurement in a Haar-random basis).
/// Layers: Hadamards, then CZ on horizontal bonds starting at even columns,
/// odd columns, vertical bonds starting at even rows, odd rows, then the
/// single-site Haar layer.
pub fn chr_layout(l: usize) -> Result<CircuitLayout> {
    chr_layout_rect(l, l)
}

pub fn chr_layout_rect(rows: usize, cols: usize) -> Result<CircuitLayout> {
    if rows < 1 || cols < 1 || rows * cols < 2 {
        return Err(Error::InvalidArgument(format!("CHR needs at least two qubits, got {rows}x{cols}")));
    }
    let mut ev = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            ev.push(GateEvent::new(1, vec![Site::new(i, j)], GateKind::HadamardLikeFixed));
        }
    }
    let mut layer = 2;
    for par in 0..2 {
        let mut any = false;
        for i in 0..rows {
            for j in (par..cols.saturating_sub(1)).step_by(2) {
                ev.push(GateEvent::new(layer, vec![Site::new(i, j), Site::new(i, j + 1)], GateKind::Cz));
                any = true;
            }
        }
        if any {
            layer += 1;
        }
    }
    for par in 0..2 {
        let mut any = false;
        for i in (par..rows.saturating_sub(1)).step_by(2) {
            for j in 0..cols {
                ev.push(GateEvent::new(layer, vec![Site::new(i, j), Site::new(i + 1, j)], GateKind::Cz));
                any = true;
            }
        }
        if any {
            layer += 1;
        }
    }
    for i in 0..rows {
        for j in 0..cols {
            ev.push(GateEvent::new(layer, vec![Site::new(i, j)], GateKind::HaarOneSite));
        }
    }
    CircuitLayout::new(rows, cols, 2, ev)
}

/// Depth-2 1D brickwork on `n` qudits laid out as a single row: layer 1 on
/// pairs `(k, k+1)` with even `k`, layer 2 with odd `k`.
pub fn one_d_brickwork_layout(n: usize, q: usize) -> Result<CircuitLayout> {
    if n < 2 {
        return Err(Error::InvalidArgument("1D brickwork needs n >= 2".into()));
    }
    let mut ev = Vec::new();
    for par in 0..2 {
        for k in (par..n - 1).step_by(2) {
            ev.push(GateEvent::new(1 + par, vec![Site::new(0, k), Site::new(0, k + 1)], GateKind::HaarTwoSite));
        }
    }
    CircuitLayout::new(1, n, q, ev)
}

/// One Haar-random single-site gate per site: a product-state circuit.
pub fn product_layout(rows: usize, cols: usize, q: usize) -> Result<CircuitLayout> {
    let ev = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| GateEvent::new(1, vec![Site::new(i, j)], GateKind::HaarOneSite)))
        .collect();
    CircuitLayout::new(rows, cols, q, ev)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Brickwork,
    ExtendedBrickwork,
    Chr,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brickwork" => Ok(Family::Brickwork),
            "extended-brickwork" => Ok(Family::ExtendedBrickwork),
            "chr" => Ok(Family::Chr),
            other => Err(Error::InvalidArgument(format!("unknown architecture family {other:?}"))),
        }
    }
}

/// Fixed gate for a non-random event. CZ generalizes to `w^(ab)` and the
/// Hadamard to the discrete Fourier transform for `q > 2`.
pub fn fixed_gate(kind: GateKind, q: usize) -> Option<ComplexTensor> {
    let omega = |k: usize| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / q as f64);
    match kind {
        GateKind::Cz => {
            let d = q * q;
            let mut t = ComplexTensor::zeros(vec![d, d]);
            for a in 0..q {
                for b in 0..q {
                    let i = a * q + b;
                    t.data_mut()[i * d + i] = omega((a * b) % q);
                }
            }
            Some(t)
        }
        GateKind::HadamardLikeFixed => {
            let s = 1.0 / (q as f64).sqrt();
            let data = (0..q * q).map(|k| omega(((k / q) * (k % q)) % q) * s).collect();
            Some(ComplexTensor::new(vec![q, q], data).expect("square"))
        }
        _ => None,
    }
}

#[derive(Clone, Debug)]
pub struct CircuitInstance {
    pub layout: CircuitLayout,
    pub gates: Vec<ComplexTensor>,
    pub seed: u64,
}

impl CircuitInstance {
    /// Draws every Haar event from its own stream derived from `(seed, event index)`.
    pub fn sample(layout: CircuitLayout, seed: u64) -> Self {
        let q = layout.q;
        let gates = layout
            .events
            .iter()
            .enumerate()
            .map(|(idx, ev)| match ev.kind {
                GateKind::HaarTwoSite => haar_unitary(q * q, &mut rng::tagged(seed, rng::domain::GATES, idx as u64)),
                GateKind::HaarOneSite => haar_unitary(q, &mut rng::tagged(seed, rng::domain::GATES, idx as u64)),
                k => fixed_gate(k, q).expect("fixed gate"),
            })
            .collect();
        Self { layout, gates, seed }
    }

    /// Instance with caller-chosen gate matrices.
    pub fn with_gates(layout: CircuitLayout, gates: Vec<ComplexTensor>, seed: u64) -> Result<Self> {
        if gates.len() != layout.events.len() {
            return Err(Error::InvalidArgument(format!(
                "{} gates for {} events",
                gates.len(),
                layout.events.len()
            )));
        }
        for (g, ev) in gates.iter().zip(&layout.events) {
            let d = layout.q.pow(ev.sites.len() as u32);
            if g.shape() != [d, d] {
                return Err(Error::Shape(format!("gate of shape {:?} for a {d}-dimensional event", g.shape())));
            }
        }
        Ok(Self { layout, gates, seed })
    }

    pub fn n_sites(&self) -> usize {
        self.layout.n_sites()
    }
}

pub fn identity_gate(dim: usize) -> ComplexTensor {
    ComplexTensor::identity(dim)
}

/// Serialized form: gates are regenerated from the seed, never stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutDocument {
    pub rows: usize,
    pub cols: usize,
    pub q: usize,
    pub seed: u64,
    pub events: Vec<EventDocument>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventDocument {
    pub layer: usize,
    pub sites: Vec<[usize; 2]>,
    pub kind: GateKind,
}

impl LayoutDocument {
    pub fn from_layout(layout: &CircuitLayout, seed: u64) -> Self {
        Self {
            rows: layout.rows,
            cols: layout.cols,
            q: layout.q,
            seed,
            events: layout
                .events
                .iter()
                .map(|e| EventDocument {
                    layer: e.layer,
                    sites: e.sites.iter().map(|s| [s.row, s.col]).collect(),
                    kind: e.kind,
                })
                .collect(),
        }
    }

    pub fn to_layout(&self) -> Result<CircuitLayout> {
        let events = self
            .events
            .iter()
            .map(|e| GateEvent::new(e.layer, e.sites.iter().map(|s| Site::new(s[0], s[1])).collect(), e.kind))
            .collect();
        CircuitLayout::new(self.rows, self.cols, self.q, events)
    }

    pub fn to_instance(&self) -> Result<CircuitInstance> {
        Ok(CircuitInstance::sample(self.to_layout()?, self.seed))
    }
}

/// `g` must precede `h`: they share a site, `g` is in an earlier layer, and
/// they do not commute. Diagonal gates commute with each other.
fn precedes(g: &GateEvent, h: &GateEvent) -> bool {
    g.layer < h.layer
        && !(g.kind.is_diagonal() && h.kind.is_diagonal())
        && g.sites.iter().any(|s| h.sites.contains(s))
}

/// For every event, the first column (0-based) whose measurement lies in its
/// causal future: the minimum over the event's own columns and over the
/// schedule of every later event it must precede. Gates scheduled at column
/// `t` are exactly those in the lightcone of columns `0..=t` but not of
/// `0..t`.
pub fn lightcone_schedule(layout: &CircuitLayout) -> Vec<usize> {
    let n = layout.events.len();
    let mut first = vec![usize::MAX; n];
    let mut by_site: HashMap<Site, Vec<usize>> = HashMap::new();
    for idx in (0..n).rev() {
        let g = &layout.events[idx];
        let mut t = g.min_col();
        for s in &g.sites {
            if let Some(later) = by_site.get(s) {
                for &h in later {
                    if precedes(g, &layout.events[h]) {
                        t = t.min(first[h]);
                    }
                }
            }
        }
        first[idx] = t;
        for s in &g.sites {
            by_site.entry(*s).or_default().push(idx);
        }
    }
    first
}

/// Gates in the lightcone of columns `0..t` (that is, the first `t`
/// columns, `1 <= t <= cols`) in layout order, and the sites they touch
/// together with the measured columns.
pub fn lightcone(layout: &CircuitLayout, t: usize) -> (Vec<usize>, BTreeSet<Site>) {
    let sched = lightcone_schedule(layout);
    let gates: Vec<usize> = (0..layout.events.len()).filter(|&g| sched[g] < t).collect();
    let mut sites: BTreeSet<Site> = gates.iter().flat_map(|&g| layout.events[g].sites.iter().copied()).collect();
    for i in 0..layout.rows {
        for j in 0..t.min(layout.cols) {
            sites.insert(Site::new(i, j));
        }
    }
    (gates, sites)
}

/// Largest number of columns a scheduled gate reaches beyond the column it is
/// scheduled at.
pub fn lightcone_radius(layout: &CircuitLayout) -> usize {
    let sched = lightcone_schedule(layout);
    layout.events.iter().zip(&sched).map(|(e, &t)| e.max_col().saturating_sub(t)).max().unwrap_or(0)
}

/// Causal past of the final-time measurement of `sites`, in layout order.
pub fn past_closure(layout: &CircuitLayout, sites: &[Site]) -> Vec<usize> {
    let targets: BTreeSet<Site> = sites.iter().copied().collect();
    let n = layout.events.len();
    let mut inside = vec![false; n];
    let mut by_site: HashMap<Site, Vec<usize>> = HashMap::new();
    for idx in (0..n).rev() {
        let g = &layout.events[idx];
        let mut take = g.sites.iter().any(|s| targets.contains(s));
        if !take {
            'outer: for s in &g.sites {
                if let Some(later) = by_site.get(s) {
                    for &h in later {
                        if inside[h] && precedes(g, &layout.events[h]) {
                            take = true;
                            break 'outer;
                        }
                    }
                }
            }
        }
        inside[idx] = take;
        for s in &g.sites {
            by_site.entry(*s).or_default().push(idx);
        }
    }
    (0..n).filter(|&i| inside[i]).collect()
}
