//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

/// Dense two-phase tableau simplex with Bland's rule solving the balanced
/// transportation LP `min Σ c_ij x_ij, Σ_j x_ij = a_i, Σ_i x_ij = b_j, x ≥ 0`.
/// Returns the optimal objective.
pub fn lp_transport(a: &[f64], b: &[f64], cost: &[f64]) -> f64 {
    let (m, n) = (a.len(), b.len());
    let nv = m * n;
    // rows: m supply rows, then n-1 demand rows (the last is implied)
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..m {
        let mut r = vec![0.0; nv];
        for j in 0..n {
            r[i * n + j] = 1.0;
        }
        rows.push((r, a[i]));
    }
    for j in 0..n - 1 {
        let mut r = vec![0.0; nv];
        for i in 0..m {
            r[i * n + j] = 1.0;
        }
        rows.push((r, b[j]));
    }
    let k = rows.len();
    let width = nv + k + 1;
    let mut tab = vec![vec![0.0; width]; k];
    let mut basis = vec![0usize; k];
    for (r, (coef, rhs)) in rows.into_iter().enumerate() {
        tab[r][..nv].copy_from_slice(&coef);
        tab[r][nv + r] = 1.0;
        tab[r][width - 1] = rhs;
        basis[r] = nv + r;
    }
    // phase 1
    let phase1: Vec<f64> = (0..nv + k)
        .map(|c| if c >= nv { 1.0 } else { 0.0 })
        .collect();
    run_simplex(&mut tab, &mut basis, &phase1, nv + k);
    // drive zero artificials out of the basis
    let mut r = 0;
    while r < tab.len() {
        if basis[r] >= nv {
            if let Some(c) = (0..nv).find(|&c| tab[r][c].abs() > 1e-12) {
                pivot(&mut tab, &mut basis, r, c);
            } else {
                tab.remove(r);
                basis.remove(r);
                continue;
            }
        }
        r += 1;
    }
    let mut phase2 = cost.to_vec();
    phase2.extend(std::iter::repeat_n(0.0, k));
    run_simplex(&mut tab, &mut basis, &phase2, nv);
    let mut obj = 0.0;
    for (r, &bv) in basis.iter().enumerate() {
        if bv < nv {
            obj += cost[bv] * tab[r][width - 1];
        }
    }
    obj
}

fn pivot(tab: &mut [Vec<f64>], basis: &mut [usize], r: usize, c: usize) {
    let p = tab[r][c];
    for v in tab[r].iter_mut() {
        *v /= p;
    }
    let prow = tab[r].clone();
    for (i, row) in tab.iter_mut().enumerate() {
        if i != r {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
    }
    basis[r] = c;
}

/// Bland's rule over the first `allowed` columns.
fn run_simplex(tab: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: usize) {
    let width = tab[0].len();
    for _ in 0..100_000 {
        let reduced = |c: usize, tab: &[Vec<f64>], basis: &[usize]| {
            let mut d = cost[c];
            for (r, &bv) in basis.iter().enumerate() {
                d -= cost[bv] * tab[r][c];
            }
            d
        };
        let Some(enter) =
            (0..allowed).find(|&c| !basis.contains(&c) && reduced(c, tab, basis) < -1e-12)
        else {
            return;
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..tab.len() {
            let a = tab[r][enter];
            if a > 1e-12 {
                let ratio = tab[r][width - 1] / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - 1e-15
                            || ((ratio - lratio).abs() <= 1e-15 && basis[r] < basis[lr])
                        {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        let (lr, _) = leave.expect("transport LP is bounded");
        pivot(tab, basis, lr, enter);
    }
    panic!("oracle simplex did not terminate");
}

/// Straightforward corpus BLEU-4: clipped n-gram matches by list scanning,
/// closest-reference brevity penalty, no smoothing. Returns 0–100.
pub fn bleu_oracle(hyps: &[Vec<&str>], refs: &[Vec<Vec<&str>>]) -> f64 {
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;
    for (h, rs) in hyps.iter().zip(refs) {
        hyp_len += h.len();
        let mut best = rs[0].len();
        for r in rs {
            let d = (r.len() as i64 - h.len() as i64).abs();
            let bd = (best as i64 - h.len() as i64).abs();
            if d < bd || (d == bd && r.len() < best) {
                best = r.len();
            }
        }
        ref_len += best;
        for n in 1..=4 {
            if h.len() < n {
                continue;
            }
            let grams: Vec<&[&str]> = h.windows(n).collect();
            total[n - 1] += grams.len();
            let mut seen: Vec<&[&str]> = Vec::new();
            for g in &grams {
                if seen.contains(g) {
                    continue;
                }
                seen.push(g);
                let count = grams.iter().filter(|x| *x == g).count();
                let max_ref = rs
                    .iter()
                    .map(|r| {
                        if r.len() < n {
                            0
                        } else {
                            r.windows(n).filter(|x| x == g).count()
                        }
                    })
                    .max()
                    .unwrap_or(0);
                matched[n - 1] += count.min(max_ref);
            }
        }
    }
    if matched.contains(&0) {
        return 0.0;
    }
    let log_p: f64 = (0..4)
        .map(|i| (matched[i] as f64 / total[i] as f64).ln())
        .sum::<f64>()
        / 4.0;
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    100.0 * bp * log_p.exp()
}
