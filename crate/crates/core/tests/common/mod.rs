//! Reference implementations used as test oracles. They are deliberately
//! simple and independent of the library code paths they check.
#![allow(dead_code)]

use lmd_core::EmbeddingSpace;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> String {
    format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// Entries uniform in [-1, 1).
pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// Approximately standard normal entries (Box-Muller).
pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| gaussian(rng))
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Q factor of a Householder QR, with columns signed so R has a positive
/// diagonal.
pub fn qr_orthogonal(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut r = a.clone();
    let mut q = Array2::<f64>::eye(n);
    for k in 0..n {
        let x: Vec<f64> = (k..n).map(|i| r[[i, k]]).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let mut v = x.clone();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|e| e * e).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // apply H = I - 2vv^T/|v|^2 to rows k.. of R and columns k.. of Q
        for j in 0..n {
            let dot: f64 = (k..n).map(|i| v[i - k] * r[[i, j]]).sum();
            for i in k..n {
                r[[i, j]] -= 2.0 * v[i - k] * dot / vnorm2;
            }
        }
        for i in 0..n {
            let dot: f64 = (k..n).map(|j| q[[i, j]] * v[j - k]).sum();
            for j in k..n {
                q[[i, j]] -= 2.0 * dot * v[j - k] / vnorm2;
            }
        }
    }
    for k in 0..n {
        if r[[k, k]] < 0.0 {
            q.column_mut(k).mapv_inplace(|v| -v);
        }
    }
    q
}

pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> Array2<f64> {
    qr_orthogonal(&gaussian_matrix(rng, n, n))
}

/// Eigenvalues of a symmetric matrix by cyclic two-sided Jacobi rotations,
/// sorted descending.
pub fn symmetric_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut a = a.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        let scale: f64 = a.iter().map(|v| v * v).sum();
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]] == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

/// Singular values via the eigenvalues of MᵀM (or MMᵀ, whichever is smaller),
/// padded with zeros to min(p, q).
pub fn singular_values_oracle(m: ArrayView2<'_, f64>) -> Vec<f64> {
    let gram = if m.nrows() >= m.ncols() {
        m.t().dot(&m)
    } else {
        m.dot(&m.t())
    };
    symmetric_eigenvalues(&gram)
        .into_iter()
        .map(|e| e.max(0.0).sqrt())
        .collect()
}

pub fn frobenius(a: &Array2<f64>) -> f64 {
    let mut s = 0.0;
    for v in a {
        s += v * v;
    }
    s.sqrt()
}

pub fn cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Every non-zero row ranked by cosine to `query`, best first, ties by index.
pub fn full_sort(space: &EmbeddingSpace, query: ArrayView1<'_, f64>) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..space.len())
        .filter(|&i| space.row(i).iter().any(|&v| v != 0.0))
        .map(|i| (i, cosine(space.row(i), query)))
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    all
}

/// 1-based rank of `target` among all candidates.
pub fn rank_of(space: &EmbeddingSpace, query: ArrayView1<'_, f64>, target: usize) -> Option<usize> {
    full_sort(space, query)
        .iter()
        .position(|&(i, _)| i == target)
        .map(|p| p + 1)
}

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Array1<f64> {
    loop {
        let v = Array1::from_shape_fn(dim, |_| gaussian(rng));
        let n = v.dot(&v).sqrt();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// Space of `n` random unit rows named w0, w1, ...
pub fn random_unit_space(rng: &mut impl Rng, n: usize, dim: usize) -> EmbeddingSpace {
    let rows = (0..n)
        .map(|i| (format!("w{i}"), random_unit(rng, dim).to_vec()))
        .collect();
    EmbeddingSpace::from_rows(rows).expect("valid random space")
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

/// Each line is one partner pair, each token written twice in shuffled
/// order. Partners always co-occur and, because a token also sees its own
/// repeat, both have the same context distribution.
pub fn partner_corpus(pairs: usize, lines: usize, seed: u64) -> Vec<String> {
    let mut rng = rng(seed);
    (0..lines)
        .map(|_| {
            let i = rng.random_range(0..pairs);
            let mut words = [format!("a{i}"), format!("b{i}"), format!("a{i}"), format!("b{i}")];
            words.shuffle(&mut rng);
            words.join(" ")
        })
        .collect()
}
