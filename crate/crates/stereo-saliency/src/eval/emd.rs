//! Earth mover's distance between saliency maps: both maps are reduced to
//! mass histograms on a coarse grid, normalized to total mass 1, and the
//! minimum transport cost between them is solved exactly.

use crate::error::{Error, Result};
use crate::raster::RasterMap;

/// Histogram side length; full-resolution transport is quadratic in pixel
/// count and adds nothing at saliency-map scales.
pub const EMD_GRID_LIMIT: usize = 32;

/// Mass below this fraction of the total is treated as drained; transport
/// of the remaining dust is bounded well under any reported precision.
const MASS_EPS_REL: f64 = 1e-14;

/// Transport distance between two same-size maps. Each map is binned to at
/// most [`EMD_GRID_LIMIT`] cells per axis (mass-preserving), normalized to
/// a distribution, and matched by minimum-cost flow with Euclidean
/// cell-index ground distance.
pub fn emd(sal: &RasterMap, gt: &RasterMap) -> Result<f64> {
    if sal.dims() != gt.dims() {
        return Err(Error::dims(format!(
            "map {}x{} vs ground truth {}x{}",
            sal.width(),
            sal.height(),
            gt.width(),
            gt.height()
        )));
    }
    let (w, h) = sal.dims();
    let gw = w.min(EMD_GRID_LIMIT);
    let gh = h.min(EMD_GRID_LIMIT);
    let p = mass_histogram(sal, gw, gh)?;
    let q = mass_histogram(gt, gw, gh)?;
    grid_emd(&p, &q, gw, gh)
}

fn mass_histogram(m: &RasterMap, gw: usize, gh: usize) -> Result<Vec<f64>> {
    if !m.is_finite() {
        return Err(Error::invalid("transport input contains non-finite values"));
    }
    if m.min_max().0 < 0.0 {
        return Err(Error::invalid("transport input has negative mass"));
    }
    let (w, h) = m.dims();
    let mut out = vec![0f64; gw * gh];
    for y in 0..h {
        let cy = y * gh / h;
        for x in 0..w {
            out[cy * gw + x * gw / w] += f64::from(m.get(x, y));
        }
    }
    Ok(out)
}

/// Exact transport cost between two nonnegative mass vectors over a
/// `gw x gh` grid (row-major), after normalizing each to total mass 1.
/// Mass shared between matching cells never moves — optimal for any
/// metric ground distance — so only the surpluses are routed.
pub fn grid_emd(p: &[f64], q: &[f64], gw: usize, gh: usize) -> Result<f64> {
    if p.len() != gw * gh || q.len() != gw * gh {
        return Err(Error::dims(format!(
            "expected {} cells, got {} and {}",
            gw * gh,
            p.len(),
            q.len()
        )));
    }
    for v in p.iter().chain(q) {
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::invalid("transport mass must be finite and nonnegative"));
        }
    }
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    if sp <= 0.0 || sq <= 0.0 {
        return Err(Error::MissingInput("cannot transport zero mass".into()));
    }
    let mut sources = Vec::new();
    let mut sinks = Vec::new();
    for i in 0..p.len() {
        let d = p[i] / sp - q[i] / sq;
        if d > 0.0 {
            sources.push((i, d));
        } else if d < 0.0 {
            sinks.push((i, -d));
        }
    }
    if sources.is_empty() || sinks.is_empty() {
        return Ok(0.0);
    }
    min_cost_transport(&sources, &sinks, gw)
}

fn cell_distance(a: usize, b: usize, gw: usize) -> f64 {
    let dx = (a % gw) as f64 - (b % gw) as f64;
    let dy = (a / gw) as f64 - (b / gw) as f64;
    dx.hypot(dy)
}

/// Successive shortest augmenting paths with node potentials. Exact for
/// real-valued masses: every augmentation saturates a source, a sink, or a
/// routed arc, and potentials keep all residual reduced costs nonnegative
/// so each search is a plain Dijkstra.
fn min_cost_transport(sources: &[(usize, f64)], sinks: &[(usize, f64)], gw: usize) -> Result<f64> {
    let m = sources.len();
    let n = sinks.len();
    let cost: Vec<f64> = (0..m * n)
        .map(|k| cell_distance(sources[k / n].0, sinks[k % n].0, gw))
        .collect();
    let mut supply: Vec<f64> = sources.iter().map(|&(_, v)| v).collect();
    let mut deficit: Vec<f64> = sinks.iter().map(|&(_, v)| v).collect();
    let total: f64 = supply.iter().sum();
    let mass_eps = total * MASS_EPS_REL;
    let flow_eps = mass_eps;
    let mut flow = vec![0f64; m * n];
    let mut pot = vec![0f64; m + n];
    let max_rounds = m * n + 4 * (m + n) + 64;

    for round in 0..=max_rounds {
        if !deficit.iter().any(|&d| d > mass_eps) {
            break;
        }
        if round == max_rounds {
            return Err(Error::invalid("transport solver failed to converge"));
        }

        // Multi-source Dijkstra over the residual graph, stopped at the
        // first settled sink that still needs mass: settle order equals
        // distance order, so it is the cheapest such sink, and every
        // unsettled label is then >= its distance, which keeps the
        // clamped potential update below exact.
        let v_total = m + n;
        let mut dist = vec![f64::INFINITY; v_total];
        let mut parent = vec![usize::MAX; v_total];
        let mut done = vec![false; v_total];
        for i in 0..m {
            if supply[i] > mass_eps {
                dist[i] = 0.0;
            }
        }
        let mut t = usize::MAX;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..v_total {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= m && deficit[u - m] > mass_eps {
                t = u;
                break;
            }
            if u < m {
                for j in 0..n {
                    let v = m + j;
                    if done[v] {
                        continue;
                    }
                    let rc = (cost[u * n + j] + pot[u] - pot[v]).max(0.0);
                    if dist[u] + rc < dist[v] {
                        dist[v] = dist[u] + rc;
                        parent[v] = u;
                    }
                }
            } else {
                let j = u - m;
                for i in 0..m {
                    if done[i] || flow[i * n + j] <= flow_eps {
                        continue;
                    }
                    let rc = (-cost[i * n + j] + pot[u] - pot[i]).max(0.0);
                    if dist[u] + rc < dist[i] {
                        dist[i] = dist[u] + rc;
                        parent[i] = u;
                    }
                }
            }
        }
        if t == usize::MAX {
            return Err(Error::invalid("transport solver: residual demand unreachable"));
        }
        // Settled nodes shift by their exact distance, everything else by
        // the target's: at the break every unsettled label is >= dt, and a
        // settled node never has an arc to an unreached one (settling
        // relaxes all its arcs), so all reduced costs stay nonnegative.
        let dt = dist[t];
        for v in 0..v_total {
            pot[v] += if done[v] { dist[v] } else { dt };
        }

        // Bottleneck along the sink <- ... <- source chain.
        let mut bottleneck = deficit[t - m];
        let mut v = t;
        while parent[v] != usize::MAX {
            let pv = parent[v];
            if v < m {
                bottleneck = bottleneck.min(flow[v * n + (pv - m)]);
            }
            v = pv;
        }
        bottleneck = bottleneck.min(supply[v]);

        let mut u = t;
        while parent[u] != usize::MAX {
            let pu = parent[u];
            if u < m {
                let f = &mut flow[u * n + (pu - m)];
                *f = (*f - bottleneck).max(0.0);
            } else {
                flow[pu * n + (u - m)] += bottleneck;
            }
            u = pu;
        }
        supply[u] -= bottleneck;
        deficit[t - m] -= bottleneck;
    }

    Ok(flow
        .iter()
        .zip(&cost)
        .map(|(&f, &c)| f * c)
        .sum())
}
