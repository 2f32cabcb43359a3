//! Patching: sample far-apart square patches exactly, then fill the gaps
//! between them and the holes at their corners by sampling each region
//! conditioned on the already-sampled sites within distance `l`.
//!
//! Every exact marginal is computed on the causal past of its sites only,
//! split into independent connected pieces.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::architecture::{brickwork_layout, past_closure, CircuitInstance, CircuitLayout, Site};
use crate::error::{Error, Result};
use crate::mps::sample_index;
use crate::oracle::{exact_entropies, simulate_subcircuit, OutputDistribution, DEFAULT_CAP_BITS};
use crate::rng;
use crate::stats;

#[derive(Clone, Debug, Serialize)]
pub struct PlannedRegion {
    /// 1: patch, 2: gap between two patches, 3: hole between four.
    pub stage: usize,
    /// Row-major.
    pub sites: Vec<Site>,
    /// Sites sampled earlier and within distance `l`, row-major.
    pub conditioning: Vec<Site>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PatchPlan {
    pub l: usize,
    pub rows: usize,
    pub cols: usize,
    /// Execution order: stage 1, then stage 2, then stage 3, each row-major.
    pub regions: Vec<PlannedRegion>,
}

impl PatchPlan {
    pub fn stage(&self, s: usize) -> impl Iterator<Item = &PlannedRegion> {
        self.regions.iter().filter(move |r| r.stage == s)
    }
}

/// Plan for lengthscale `l`; requires `l > 2 d`.
pub fn plan_patches(layout: &CircuitLayout, l: usize) -> Result<PatchPlan> {
    if l <= 2 * layout.depth {
        return Err(Error::InvalidArgument(format!("lengthscale {l} must exceed twice the depth {}", layout.depth)));
    }
    plan_patches_relaxed(layout.rows, layout.cols, l)
}

/// The same tiling with no constraint tying `l` to the depth: patches of
/// side `l` at period `2l`, clipped to the lattice. Used to study the
/// stitching error at sizes the oracle can check.
pub fn plan_patches_relaxed(rows: usize, cols: usize, l: usize) -> Result<PatchPlan> {
    if l == 0 || rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("empty lattice or zero lengthscale".into()));
    }
    let band = |n: usize| -> Vec<(usize, usize, bool)> {
        // (start, end, is_patch_band)
        let mut v = Vec::new();
        let mut s = 0;
        let mut patch = true;
        while s < n {
            let e = (s + l).min(n);
            v.push((s, e, patch));
            patch = !patch;
            s = e;
        }
        v
    };
    let (rb, cb) = if l >= rows.max(cols) { (vec![(0, rows, true)], vec![(0, cols, true)]) } else { (band(rows), band(cols)) };
    let mut cells: Vec<(usize, Vec<Site>)> = Vec::new();
    for &(r0, r1, rp) in &rb {
        for &(c0, c1, cp) in &cb {
            let stage = match (rp, cp) {
                (true, true) => 1,
                (false, false) => 3,
                _ => 2,
            };
            let sites = (r0..r1).flat_map(|i| (c0..c1).map(move |j| Site::new(i, j))).collect();
            cells.push((stage, sites));
        }
    }
    cells.sort_by_key(|(s, _)| *s);
    let mut regions = Vec::new();
    let mut done: Vec<Site> = Vec::new();
    for (stage, sites) in cells {
        let conditioning: Vec<Site> = {
            let set: BTreeSet<Site> = done.iter().filter(|d| sites.iter().any(|s| s.dist(d) <= l)).copied().collect();
            set.into_iter().collect()
        };
        let cond = if stage == 1 { Vec::new() } else { conditioning };
        done.extend(&sites);
        regions.push(PlannedRegion { stage, sites, conditioning: cond });
    }
    Ok(PatchPlan { l, rows, cols, regions })
}

/// Exact marginal of the output distribution on `sites` (returned in
/// row-major order), simulating only the causal past of those sites, one
/// connected piece at a time. Each piece must fit `cap_bits`.
pub fn marginal_distribution(instance: &CircuitInstance, sites: &[Site], cap_bits: f64) -> Result<OutputDistribution> {
    let layout = &instance.layout;
    let q = layout.q;
    let targets: BTreeSet<Site> = sites.iter().copied().collect();
    let gates = past_closure(layout, sites);
    // Union-find over the sites involved.
    let mut all: BTreeSet<Site> = targets.clone();
    for &g in &gates {
        all.extend(layout.events[g].sites.iter().copied());
    }
    let idx: BTreeMap<Site, usize> = all.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let list: Vec<Site> = all.iter().copied().collect();
    let mut parent: Vec<usize> = (0..list.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let n = p[y];
            p[y] = r;
            y = n;
        }
        r
    }
    for &g in &gates {
        let ss = &layout.events[g].sites;
        for w in ss.windows(2) {
            let (a, b) = (find(&mut parent, idx[&w[0]]), find(&mut parent, idx[&w[1]]));
            parent[a] = b;
        }
    }
    let mut comps: BTreeMap<usize, (Vec<Site>, Vec<usize>)> = BTreeMap::new();
    for (i, s) in list.iter().enumerate() {
        let r = find(&mut parent, i);
        comps.entry(r).or_default().0.push(*s);
    }
    for &g in &gates {
        let r = find(&mut parent, idx[&layout.events[g].sites[0]]);
        comps.get_mut(&r).expect("component").1.push(g);
    }
    let mut dist = OutputDistribution::new(0, q, vec![1.0])?;
    let mut order: Vec<Site> = Vec::new();
    for (_, (csites, cgates)) in comps {
        let keep: Vec<usize> = csites.iter().enumerate().filter(|(_, s)| targets.contains(s)).map(|(i, _)| i).collect();
        if keep.is_empty() {
            continue;
        }
        let piece = if cgates.is_empty() {
            let mut p = vec![0.0; q.pow(keep.len() as u32)];
            p[0] = 1.0;
            OutputDistribution::new(keep.len(), q, p)?
        } else {
            simulate_subcircuit(instance, &cgates, &csites, cap_bits)?.probabilities().marginal(&keep)
        };
        order.extend(keep.iter().map(|&i| csites[i]));
        dist = dist.product(&piece);
    }
    // Reorder into row-major.
    let pos: BTreeMap<Site, usize> = order.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let perm: Vec<usize> = targets.iter().map(|s| pos[s]).collect();
    Ok(dist.permute(&perm))
}

/// Caches the joint marginal of every region with its conditioning set.
pub struct PatchEngine<'a> {
    pub instance: &'a CircuitInstance,
    pub cap_bits: f64,
    cache: HashMap<Vec<Site>, OutputDistribution>,
}

impl<'a> PatchEngine<'a> {
    pub fn new(instance: &'a CircuitInstance, cap_bits: f64) -> Self {
        Self { instance, cap_bits, cache: HashMap::new() }
    }

    /// Joint marginal on the row-major sorted `sites`.
    pub fn joint(&mut self, sites: &[Site]) -> Result<&OutputDistribution> {
        let mut key = sites.to_vec();
        key.sort();
        key.dedup();
        if !self.cache.contains_key(&key) {
            let d = marginal_distribution(self.instance, &key, self.cap_bits)?;
            self.cache.insert(key.clone(), d);
        }
        Ok(&self.cache[&key])
    }

    /// Conditional law of `region` given the assignment `conditioned`
    /// (site -> outcome), as probabilities over row-major region strings.
    pub fn conditional(&mut self, region: &[Site], conditioned: &BTreeMap<Site, usize>) -> Result<Vec<f64>> {
        let q = self.instance.layout.q;
        let mut all: Vec<Site> = region.iter().chain(conditioned.keys()).copied().collect();
        all.sort();
        all.dedup();
        let mut reg = region.to_vec();
        reg.sort();
        let joint = self.joint(&all)?;
        let n = all.len();
        let mut out = vec![0.0; q.pow(reg.len() as u32)];
        let cond_pos: Vec<(usize, usize)> = conditioned.iter().map(|(s, &v)| (all.binary_search(s).expect("site"), v)).collect();
        let reg_pos: Vec<usize> = reg.iter().map(|s| all.binary_search(s).expect("site")).collect();
        let stride = |p: usize| q.pow((n - 1 - p) as u32);
        'entries: for (idx, &p) in joint.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for &(cp, v) in &cond_pos {
                if (idx / stride(cp)) % q != v {
                    continue 'entries;
                }
            }
            let r = reg_pos.iter().fold(0usize, |acc, &rp| acc * q + (idx / stride(rp)) % q);
            out[r] += p;
        }
        let tot: f64 = out.iter().sum();
        if tot.is_nan() || tot <= 0.0 {
            return Err(Error::ZeroNorm("conditioning event has probability zero".into()));
        }
        out.iter_mut().for_each(|x| *x /= tot);
        Ok(out)
    }
}

/// Exact sample of `region` (returned row-major) from the marginal
/// conditioned on `conditioned`.
pub fn sample_patch<R: Rng + ?Sized>(
    engine: &mut PatchEngine<'_>,
    region: &[Site],
    conditioned: &BTreeMap<Site, usize>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let q = engine.instance.layout.q;
    let p = engine.conditional(region, conditioned)?;
    let mut idx = sample_index(&p, rng);
    let mut out = vec![0; region.len()];
    for k in (0..region.len()).rev() {
        out[k] = idx % q;
        idx /= q;
    }
    Ok(out)
}

/// Full lattice sample, row-major.
pub fn recovery_stitch<R: Rng + ?Sized>(engine: &mut PatchEngine<'_>, plan: &PatchPlan, rng: &mut R) -> Result<Vec<usize>> {
    let layout = engine.instance.layout.clone();
    let mut assigned: BTreeMap<Site, usize> = BTreeMap::new();
    for reg in &plan.regions {
        let cond: BTreeMap<Site, usize> = reg.conditioning.iter().map(|s| (*s, assigned[s])).collect();
        let x = sample_patch(engine, &reg.sites, &cond, rng)?;
        for (s, v) in reg.sites.iter().zip(x) {
            assigned.insert(*s, v);
        }
    }
    Ok(layout.sites().iter().map(|s| assigned[s]).collect())
}

/// Product of the plan's conditional probabilities for the row-major
/// string `x`, computed in log space.
pub fn patching_probability(engine: &mut PatchEngine<'_>, plan: &PatchPlan, x: &[usize]) -> Result<f64> {
    let layout = engine.instance.layout.clone();
    if x.len() != layout.n_sites() {
        return Err(Error::InvalidArgument(format!("string of length {} for {} sites", x.len(), layout.n_sites())));
    }
    let q = layout.q;
    let mut acc = 0.0;
    for reg in &plan.regions {
        let cond: BTreeMap<Site, usize> = reg.conditioning.iter().map(|s| (*s, x[layout.site_index(*s)])).collect();
        let p = match engine.conditional(&reg.sites, &cond) {
            Ok(p) => p,
            Err(Error::ZeroNorm(_)) => return Ok(0.0),
            Err(e) => return Err(e),
        };
        let r = reg.sites.iter().fold(0usize, |a, s| a * q + x[layout.site_index(*s)]);
        if p[r] <= 0.0 {
            return Ok(0.0);
        }
        acc += p[r].ln();
    }
    Ok(acc.exp())
}

/// The whole law of [`recovery_stitch`], by enumeration (`n log2 q <= 20`).
pub fn stitched_distribution(engine: &mut PatchEngine<'_>, plan: &PatchPlan) -> Result<OutputDistribution> {
    let layout = engine.instance.layout.clone();
    crate::oracle::check_cap(layout.n_sites(), layout.q, 20.0)?;
    let q = layout.q;
    let n = layout.n_sites();
    // Conditional tables per region: joint over region+conditioning and the
    // conditioning marginal.
    struct Table {
        pos: Vec<usize>,
        joint: Vec<f64>,
        cond_pos: Vec<usize>,
        cond: Vec<f64>,
    }
    let mut tables = Vec::new();
    for reg in &plan.regions {
        let mut all: Vec<Site> = reg.sites.iter().chain(&reg.conditioning).copied().collect();
        all.sort();
        let j = engine.joint(&all)?.clone();
        let cpos: Vec<usize> = reg.conditioning.iter().map(|s| all.binary_search(s).expect("site")).collect();
        let cm = j.marginal(&cpos);
        tables.push(Table {
            pos: all.iter().map(|s| layout.site_index(*s)).collect(),
            joint: j.probs,
            cond_pos: reg.conditioning.iter().map(|s| layout.site_index(*s)).collect(),
            cond: cm.probs,
        });
    }
    let total = q.pow(n as u32);
    let probs: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let digit = |site: usize| (idx / q.pow((n - 1 - site) as u32)) % q;
            let mut p = 1.0;
            for t in &tables {
                let a = t.pos.iter().fold(0usize, |acc, &s| acc * q + digit(s));
                let b = t.cond_pos.iter().fold(0usize, |acc, &s| acc * q + digit(s));
                if t.joint[a] == 0.0 {
                    return 0.0;
                }
                p *= t.joint[a] / t.cond[b];
            }
            p
        })
        .collect();
    OutputDistribution::new(n, q, probs)
}

#[derive(Clone, Debug, Serialize)]
pub struct StepError {
    pub region: usize,
    /// `I(A:C|B)` in bits with `A` the region, `B` its conditioning set and
    /// `C` every other site sampled before it.
    pub cmi: f64,
    /// Half the 1-norm between the true marginal on `ABC` and its recovery
    /// from `AB`.
    pub tv: f64,
}

/// Per-region stitching errors measured against a full output distribution.
pub fn stitch_step_errors(plan: &PatchPlan, dist: &OutputDistribution, layout: &CircuitLayout) -> Result<Vec<StepError>> {
    let mut out = Vec::new();
    let mut done: Vec<Site> = Vec::new();
    for (k, reg) in plan.regions.iter().enumerate() {
        let a: Vec<usize> = reg.sites.iter().map(|s| layout.site_index(*s)).collect();
        let b: Vec<usize> = reg.conditioning.iter().map(|s| layout.site_index(*s)).collect();
        let c: Vec<usize> = done.iter().filter(|s| !reg.conditioning.contains(s)).map(|s| layout.site_index(*s)).collect();
        let cmi = if c.is_empty() { 0.0 } else { exact_entropies(dist, &a, &b, &c)?.cmi };
        let tv = 0.5 * markov_defect(dist, &a, &b, &c);
        out.push(StepError { region: k, cmi, tv });
        done.extend(&reg.sites);
    }
    Ok(out)
}

/// `|| p_ABC - p_{A|B} p_BC ||_1`.
pub fn markov_defect(dist: &OutputDistribution, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
    let abc: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
    let pabc = dist.marginal(&abc);
    let ab: Vec<usize> = (0..a.len() + b.len()).collect();
    let bc: Vec<usize> = (a.len()..abc.len()).collect();
    let bb: Vec<usize> = (a.len()..a.len() + b.len()).collect();
    let pab = pabc.marginal(&ab);
    let pbc = pabc.marginal(&bc);
    let pb = pabc.marginal(&bb);
    let q = dist.local_dim;
    let (na, nb, nc) = (q.pow(a.len() as u32), q.pow(b.len() as u32), q.pow(c.len() as u32));
    let mut s = 0.0;
    for ia in 0..na {
        for ib in 0..nb {
            for ic in 0..nc {
                let p = pabc.probs[(ia * nb + ib) * nc + ic];
                let r = if pb.probs[ib] > 0.0 { pab.probs[ia * nb + ib] * pbc.probs[ib * nc + ic] / pb.probs[ib] } else { 0.0 };
                s += (p - r).abs();
            }
        }
    }
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct CmiRow {
    pub separation: usize,
    /// Mean with tiny negatives clipped to zero.
    pub cmi_mean: f64,
    pub cmi_stderr: f64,
    pub n_instances: usize,
    /// Mean of the unclipped values.
    pub cmi_raw_mean: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CmiTable {
    pub rows: Vec<CmiRow>,
}

impl CmiTable {
    pub fn write_csv<W: std::io::Write>(&self, seed: u64, config_hash: &str, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["separation", "cmi_mean", "cmi_stderr", "n_instances", "seed", "config_hash"])?;
        for r in &self.rows {
            wr.write_record([
                r.separation.to_string(),
                format!("{:e}", r.cmi_mean),
                format!("{:e}", r.cmi_stderr),
                r.n_instances.to_string(),
                seed.to_string(),
                config_hash.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Column tripartition on a brickwork strip: `B` is column 0, `A` column 1
/// and `C` column `1 + l`. Averages the exact `I(A:C|B)` over `instances`
/// random instances, the same instances for every separation.
pub fn cmi_decay_scan(rows: usize, cols: usize, q: usize, separations: &[usize], instances: usize, seed: u64) -> Result<CmiTable> {
    let layout = brickwork_layout(rows, cols, q)?;
    for &l in separations {
        if l == 0 || 1 + l >= cols {
            return Err(Error::InvalidArgument(format!("separation {l} does not fit {cols} columns")));
        }
    }
    let col = |j: usize| -> Vec<Site> { (0..rows).map(|i| Site::new(i, j)).collect() };
    let per: Vec<Result<Vec<f64>>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let inst = CircuitInstance::sample(layout.clone(), rng::derive_seed(seed, i as u64));
            separations
                .iter()
                .map(|&l| {
                    let mut sites = col(0);
                    sites.extend(col(1));
                    sites.extend(col(1 + l));
                    let d = marginal_distribution(&inst, &sites, DEFAULT_CAP_BITS)?;
                    // Row-major order interleaves columns; recover positions.
                    let mut sorted = sites.clone();
                    sorted.sort();
                    let pos = |s: &Site| sorted.binary_search(s).expect("site");
                    let a: Vec<usize> = col(1).iter().map(pos).collect();
                    let b: Vec<usize> = col(0).iter().map(pos).collect();
                    let c: Vec<usize> = col(1 + l).iter().map(pos).collect();
                    Ok(exact_entropies(&d, &a, &b, &c)?.cmi)
                })
                .collect()
        })
        .collect();
    let mut vals: Vec<Vec<f64>> = vec![Vec::new(); separations.len()];
    for r in per {
        for (k, v) in r?.into_iter().enumerate() {
            vals[k].push(v);
        }
    }
    let rows_out = separations
        .iter()
        .zip(vals)
        .map(|(&l, v)| {
            let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
            CmiRow {
                separation: l,
                cmi_mean: stats::mean(&clipped),
                cmi_stderr: stats::std_err(&clipped),
                n_instances: v.len(),
                cmi_raw_mean: stats::mean(&v),
            }
        })
        .collect();
    Ok(CmiTable { rows: rows_out })
}
