//! Word Mover's Distance by an exact transportation simplex.
//!
//! Sentences become normalised bags of words over L2-normalised embeddings;
//! the distance is the optimum of the balanced transportation problem with
//! Euclidean ground cost. The solver starts from a north-west-corner basis and
//! pivots on the most negative reduced cost (MODI potentials) until no
//! improving cell remains.

use std::collections::BTreeMap;

use crate::corpus::Vocab;
use crate::error::{contract, shape_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Embedding table with every row scaled to unit length (zero rows stay zero).
#[derive(Clone, Debug, PartialEq)]
pub struct WordEmbeddings<T> {
    table: Tensor<T>,
}

impl<T: Scalar> WordEmbeddings<T> {
    pub fn normalized(raw: &Tensor<T>) -> Self {
        let mut table = raw.clone();
        for r in 0..table.rows() {
            let row = table.row_mut(r);
            let norm = row.iter().map(|&v| v * v).sum::<T>().sqrt();
            if norm > T::zero() {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        Self { table }
    }

    pub fn vocab_size(&self) -> usize {
        self.table.rows()
    }

    pub fn vector(&self, id: usize) -> &[T] {
        self.table.row(id)
    }

    pub fn distance(&self, a: usize, b: usize) -> T {
        if a == b {
            return T::zero();
        }
        self.vector(a)
            .iter()
            .zip(self.vector(b))
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum::<T>()
            .sqrt()
    }
}

/// Normalised bag of words: unique ids with positive masses summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct NBowSignature<T> {
    pub words: Vec<usize>,
    pub mass: Vec<T>,
}

impl<T: Scalar> NBowSignature<T> {
    pub fn from_pairs(pairs: Vec<(usize, T)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(contract!("signature needs at least one word"));
        }
        let total: T = pairs.iter().map(|p| p.1).sum();
        let (words, mass) = pairs.into_iter().map(|(w, m)| (w, m / total)).unzip();
        Ok(Self { words, mass })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Bag of words over in-vocabulary, non-reserved tokens.
pub fn signature<T: Scalar>(ids: &[usize], emb: &WordEmbeddings<T>) -> Result<NBowSignature<T>> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &id in ids {
        if !Vocab::is_reserved(id) && id < emb.vocab_size() {
            *counts.entry(id).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(contract!("every token was filtered from the signature"));
    }
    NBowSignature::from_pairs(
        counts
            .into_iter()
            .map(|(w, c)| (w, T::from_usize(c).unwrap()))
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan<T> {
    /// `m × n` flows.
    pub flow: Tensor<T>,
    /// `m × n` ground costs.
    pub cost: Tensor<T>,
    pub objective: T,
}

/// Solves `min Σ T_ij c_ij` subject to row sums `supply`, column sums `demand`, `T ≥ 0`.
pub fn transport_simplex<T: Scalar>(
    supply: &[T],
    demand: &[T],
    cost: &Tensor<T>,
) -> Result<TransportPlan<T>> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 || cost.rows() != m || cost.cols() != n {
        return Err(shape_err!(
            "transport problem {m}×{n} with cost {:?}",
            cost.shape()
        ));
    }
    let c = cost.data();
    let mut flow = vec![T::zero(); m * n];
    let mut basic = vec![false; m * n];

    // north-west corner; ties advance the row so the basis keeps m+n-1 cells
    let mut rs = supply.to_vec();
    let mut cs = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    loop {
        let q = rs[i].min(cs[j]).max(T::zero());
        flow[i * n + j] = q;
        basic[i * n + j] = true;
        rs[i] -= q;
        cs[j] -= q;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if (rs[i] <= cs[j] && i < m - 1) || j == n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }

    let scale = c.iter().fold(T::one(), |a, &b| a.max(b.abs()));
    let tol = T::lit(1e-12) * scale;
    let max_iter = 50 * (m + n) * (m + n) + 100;
    let mut u = vec![T::zero(); m];
    let mut v = vec![T::zero(); n];
    let mut iter = 0;
    loop {
        potentials(&basic, c, m, n, &mut u, &mut v)?;
        let mut best = -tol;
        let mut enter = None;
        for i in 0..m {
            for j in 0..n {
                if !basic[i * n + j] {
                    let d = c[i * n + j] - u[i] - v[j];
                    if d < best {
                        best = d;
                        enter = Some((i, j));
                    }
                }
            }
        }
        let Some((ei, ej)) = enter else { break };
        iter += 1;
        if iter > max_iter {
            return Err(Error::Numeric(format!(
                "transportation simplex exceeded {max_iter} pivots"
            )));
        }
        let path = tree_path(&basic, m, n, ei, ej)?;
        // path cells alternate −,+,−,… starting from the column end
        let mut theta = T::infinity();
        let mut leave = None;
        for (k, &(pi, pj)) in path.iter().enumerate() {
            if k % 2 == 0 {
                let f = flow[pi * n + pj];
                if f < theta {
                    theta = f;
                    leave = Some((pi, pj));
                }
            }
        }
        let (li, lj) = leave.ok_or_else(|| Error::Numeric("degenerate pivot cycle".into()))?;
        for (k, &(pi, pj)) in path.iter().enumerate() {
            if k % 2 == 0 {
                flow[pi * n + pj] -= theta;
            } else {
                flow[pi * n + pj] += theta;
            }
        }
        flow[ei * n + ej] = theta;
        basic[ei * n + ej] = true;
        basic[li * n + lj] = false;
        flow[li * n + lj] = T::zero();
    }

    for f in flow.iter_mut() {
        if *f < T::zero() {
            *f = T::zero();
        }
    }
    let objective = flow.iter().zip(c).map(|(&f, &cc)| f * cc).sum();
    Ok(TransportPlan {
        flow: Tensor::from_vec(&[m, n], flow)?,
        cost: cost.clone(),
        objective,
    })
}

/// Dual potentials with `u[0] = 0`, solved over the basis spanning tree.
fn potentials<T: Scalar>(
    basic: &[bool],
    c: &[T],
    m: usize,
    n: usize,
    u: &mut [T],
    v: &mut [T],
) -> Result<()> {
    let mut row_set = vec![false; m];
    let mut col_set = vec![false; n];
    u[0] = T::zero();
    row_set[0] = true;
    let mut stack = vec![(true, 0usize)];
    while let Some((is_row, k)) = stack.pop() {
        if is_row {
            for j in 0..n {
                if basic[k * n + j] && !col_set[j] {
                    v[j] = c[k * n + j] - u[k];
                    col_set[j] = true;
                    stack.push((false, j));
                }
            }
        } else {
            for i in 0..m {
                if basic[i * n + k] && !row_set[i] {
                    u[i] = c[i * n + k] - v[k];
                    row_set[i] = true;
                    stack.push((true, i));
                }
            }
        }
    }
    if row_set.iter().chain(&col_set).all(|&b| b) {
        Ok(())
    } else {
        Err(Error::Numeric(
            "transport basis is not a spanning tree".into(),
        ))
    }
}

/// Basic cells on the tree path from column `ej` back to row `ei`.
fn tree_path(
    basic: &[bool],
    m: usize,
    n: usize,
    ei: usize,
    ej: usize,
) -> Result<Vec<(usize, usize)>> {
    // nodes: rows 0..m, columns m..m+n
    let total = m + n;
    let mut parent = vec![usize::MAX; total];
    let start = ei;
    let goal = m + ej;
    parent[start] = start;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == goal {
            break;
        }
        if node < m {
            for j in 0..n {
                if basic[node * n + j] && parent[m + j] == usize::MAX {
                    parent[m + j] = node;
                    queue.push_back(m + j);
                }
            }
        } else {
            let j = node - m;
            for i in 0..m {
                if basic[i * n + j] && parent[i] == usize::MAX {
                    parent[i] = node;
                    queue.push_back(i);
                }
            }
        }
    }
    if parent[goal] == usize::MAX {
        return Err(Error::Numeric("no basis path for entering cell".into()));
    }
    let mut path = Vec::new();
    let mut node = goal;
    while node != start {
        let p = parent[node];
        let cell = if node >= m {
            (p, node - m)
        } else {
            (node, p - m)
        };
        path.push(cell);
        node = p;
    }
    Ok(path)
}

/// Optimal transport plan between two signatures.
pub fn wmd_plan<T: Scalar>(
    a: &NBowSignature<T>,
    b: &NBowSignature<T>,
    emb: &WordEmbeddings<T>,
) -> Result<TransportPlan<T>> {
    let mut cost = Tensor::zeros(&[a.len(), b.len()]);
    for (i, &wa) in a.words.iter().enumerate() {
        for (j, &wb) in b.words.iter().enumerate() {
            cost.set(i, j, emb.distance(wa, wb));
        }
    }
    transport_simplex(&a.mass, &b.mass, &cost)
}

pub fn wmd<T: Scalar>(
    a: &NBowSignature<T>,
    b: &NBowSignature<T>,
    emb: &WordEmbeddings<T>,
) -> Result<T> {
    Ok(wmd_plan(a, b, emb)?.objective)
}

/// Content similarity `−WMD(candidate, source)`.
pub fn con_score<T: Scalar>(
    candidate: &[usize],
    source: &[usize],
    emb: &WordEmbeddings<T>,
) -> Result<T> {
    let a = signature(candidate, emb)?;
    let b = signature(source, emb)?;
    Ok(-wmd(&a, &b, emb)?)
}

/// One `src → dst : mass × cost` line per positive flow.
pub fn render_plan<T: Scalar>(
    plan: &TransportPlan<T>,
    a: &NBowSignature<T>,
    b: &NBowSignature<T>,
    vocab: &Vocab,
) -> String {
    let mut out = String::new();
    for (i, &wa) in a.words.iter().enumerate() {
        for (j, &wb) in b.words.iter().enumerate() {
            let f = plan.flow.get(i, j);
            if f > T::zero() {
                out.push_str(&format!(
                    "{} → {} : {:.6} × {:.6}\n",
                    vocab.token(wa),
                    vocab.token(wb),
                    f.as_f64(),
                    plan.cost.get(i, j).as_f64()
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::normal_init;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn emb(vocab: usize, dim: usize, seed: u64) -> WordEmbeddings<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        WordEmbeddings::normalized(&normal_init(&mut rng, &[vocab, dim], 1.0))
    }

    #[test]
    fn signature_counts_and_normalises() {
        let e = emb(10, 3, 0);
        let s = signature(&[5, 5, 6], &e).unwrap();
        assert_eq!(s.words, vec![5, 6]);
        assert!((s.mass[0] - 2.0f64 / 3.0).abs() < 1e-15);
        assert!((s.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(
            signature(&[5, 6], &e).unwrap(),
            signature(&[6, 5], &e).unwrap()
        );
    }

    #[test]
    fn signature_filters_reserved_tokens() {
        let e = emb(10, 3, 0);
        assert!(signature::<f64>(&[0, 1, 2, 3], &e).is_err());
        assert_eq!(signature(&[1, 7], &e).unwrap().words, vec![7]);
    }

    #[test]
    fn identical_sentences_have_zero_distance() {
        let e = emb(12, 4, 1);
        let a = signature(&[4, 5, 6, 6, 9], &e).unwrap();
        assert_eq!(wmd(&a, &a, &e).unwrap(), 0.0);
    }

    #[test]
    fn single_words_cost_their_euclidean_distance() {
        let e = emb(12, 4, 2);
        let a = signature(&[4], &e).unwrap();
        let b = signature(&[7], &e).unwrap();
        let d: f64 = e
            .vector(4)
            .iter()
            .zip(e.vector(7))
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((wmd(&a, &b, &e).unwrap() - d).abs() < 1e-15);
    }

    #[test]
    fn plan_marginals_match() {
        let e = emb(20, 5, 3);
        let a = signature(&[4, 5, 5, 6, 11, 12], &e).unwrap();
        let b = signature(&[7, 8, 8, 8, 13], &e).unwrap();
        let plan = wmd_plan(&a, &b, &e).unwrap();
        for i in 0..a.len() {
            let s: f64 = plan.flow.row(i).iter().sum();
            assert!((s - a.mass[i]).abs() < 1e-8);
        }
        for j in 0..b.len() {
            let s: f64 = (0..a.len()).map(|i| plan.flow.get(i, j)).sum();
            assert!((s - b.mass[j]).abs() < 1e-8);
        }
        assert!(plan.flow.data().iter().all(|&f| f >= 0.0));
    }

    #[test]
    fn hand_solved_two_by_two() {
        // costs [[0,1],[1,0]] with supply (0.7,0.3) and demand (0.4,0.6): 0.3 must cross
        let cost = Tensor::<f64>::from_vec(&[2, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let plan = transport_simplex(&[0.7, 0.3], &[0.4, 0.6], &cost).unwrap();
        assert!((plan.objective - 0.3).abs() < 1e-12);
    }

    #[test]
    fn swapping_for_a_far_word_lowers_con() {
        // hand-built 2-d embeddings: ids 4 and 5 close, 6 opposite
        let table = Tensor::from_vec(
            &[7, 2],
            vec![
                0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.9, 0.1, -1.0, 0.0,
            ],
        )
        .unwrap();
        let e = WordEmbeddings::normalized(&table);
        let near = con_score(&[5, 4], &[4, 4], &e).unwrap();
        let far = con_score(&[6, 4], &[4, 4], &e).unwrap();
        assert!(far < near);
        assert!(near <= 0.0);
        assert_eq!(con_score(&[4, 5], &[4, 5], &e).unwrap(), 0.0);
    }

    #[test]
    fn con_is_symmetric() {
        let e = emb(30, 6, 9);
        let x = [4, 9, 9, 17, 22];
        let y = [5, 9, 28, 28, 28, 6];
        let d1 = con_score(&x, &y, &e).unwrap();
        let d2 = con_score(&y, &x, &e).unwrap();
        assert!((d1 - d2).abs() < 1e-8);
    }

    #[test]
    fn works_in_single_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = WordEmbeddings::<f32>::normalized(&normal_init(&mut rng, &[10, 3], 1.0));
        let a = signature(&[4, 5], &e).unwrap();
        let b = signature(&[6], &e).unwrap();
        assert!(wmd(&a, &b, &e).unwrap() > 0.0);
    }
}
