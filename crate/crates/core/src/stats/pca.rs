//! Principal component analysis over pattern vectors.
//!
//! Covariance uses the population (1/N) form. The eigensolver is a cyclic
//! Jacobi iteration; when there are fewer vectors than dimensions the
//! covariance eigenpairs are recovered from the small Gram matrix instead.

use super::StatsError;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Rows are unit eigenvectors ordered by non-increasing eigenvalue, sign
    /// fixed so each row's largest-magnitude entry is positive.
    pub projection: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Trace of the covariance matrix; denominator for explained fractions.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.projection.len()
    }

    pub fn explained_fractions(&self) -> Vec<f64> {
        if self.total_variance <= 0.0 {
            return vec![0.0; self.eigenvalues.len()];
        }
        self.eigenvalues.iter().map(|&l| l / self.total_variance).collect()
    }

    /// Project into the reduced space: `W (p - mean)`.
    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>, StatsError> {
        if p.len() != self.input_dim() {
            return Err(StatsError::DimensionMismatch {
                expected: self.input_dim(),
                found: p.len(),
            });
        }
        Ok(self
            .projection
            .iter()
            .map(|row| row.iter().zip(p).zip(&self.mean).map(|((w, x), m)| w * (x - m)).sum())
            .collect())
    }

    /// Back into pattern space: `mean + W^T r`. Used to rank the patterns
    /// correlated with a PCA axis.
    pub fn backproject(&self, r: &[f64]) -> Result<Vec<f64>, StatsError> {
        if r.len() != self.output_dim() {
            return Err(StatsError::DimensionMismatch {
                expected: self.output_dim(),
                found: r.len(),
            });
        }
        let mut out = self.mean.clone();
        for (row, &coef) in self.projection.iter().zip(r) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += coef * w;
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<(), std::io::Error> {
        let mut out = format!("# gomine pca v1 n={} m={}\n", self.input_dim(), self.output_dim());
        out.push_str(&format!("total_variance\t{}\n", self.total_variance));
        out.push_str("mean");
        for v in &self.mean {
            out.push_str(&format!("\t{}", v));
        }
        out.push('\n');
        for (l, row) in self.eigenvalues.iter().zip(&self.projection) {
            out.push_str(&format!("axis\t{}", l));
            for v in row {
                out.push_str(&format!("\t{}", v));
            }
            out.push('\n');
        }
        fs::write(path, out)
    }

    pub fn load(path: &Path) -> Result<PcaModel, StatsError> {
        let text = fs::read_to_string(path).map_err(|e| StatsError::Format(e.to_string()))?;
        let mut mean = None;
        let mut total_variance = None;
        let mut eigenvalues = Vec::new();
        let mut projection = Vec::new();
        for line in text.lines() {
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| StatsError::Format(format!("bad number '{}'", s)))
            };
            match fields[0] {
                "total_variance" => total_variance = Some(parse(fields[1])?),
                "mean" => {
                    mean = Some(fields[1..].iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()?)
                }
                "axis" => {
                    eigenvalues.push(parse(fields[1])?);
                    projection.push(fields[2..].iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()?);
                }
                other => return Err(StatsError::Format(format!("unknown record '{}'", other))),
            }
        }
        Ok(PcaModel {
            mean: mean.ok_or_else(|| StatsError::Format("missing mean".to_string()))?,
            projection,
            eigenvalues,
            total_variance: total_variance
                .ok_or_else(|| StatsError::Format("missing total_variance".to_string()))?,
        })
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as rows), sorted by non-increasing
/// eigenvalue.
pub fn symmetric_eigen(matrix: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>), StatsError> {
    let n = matrix.len();
    assert!(matrix.iter().all(|row| row.len() == n), "matrix must be square");
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let scale: f64 = (0..n).map(|i| a[i][i].abs()).fold(1.0, f64::max);
    let tolerance = f64::EPSILON * scale * n as f64;

    let mut converged = false;
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q].abs())
            .sum();
        if off <= tolerance {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                let apq = a[p][q];
                let app = a[p][p];
                let aqq = a[q][q];
                a[p][p] = app - t * apq;
                a[q][q] = aqq + t * apq;
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for i in 0..n {
                    if i != p && i != q {
                        let aip = a[i][p];
                        let aiq = a[i][q];
                        a[i][p] = c * aip - s * aiq;
                        a[p][i] = a[i][p];
                        a[i][q] = s * aip + c * aiq;
                        a[q][i] = a[i][q];
                    }
                }
                for row in v.iter_mut() {
                    let vip = row[p];
                    let viq = row[q];
                    row[p] = c * vip - s * viq;
                    row[q] = s * vip + c * viq;
                }
            }
        }
    }
    if !converged {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q].abs())
            .sum();
        if off > tolerance {
            return Err(StatsError::NonConvergence);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap().then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let eigenvectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row][col]).collect())
        .collect();
    Ok((eigenvalues, eigenvectors))
}

fn fix_sign(row: &mut [f64]) {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if v.abs() > row[best].abs() {
            best = i;
        }
    }
    if row[best] < 0.0 {
        for v in row.iter_mut() {
            *v = -*v;
        }
    }
}

fn centered(vectors: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>, f64) {
    let count = vectors.len();
    let n = vectors[0].len();
    let mut mean = vec![0.0; n];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= count as f64;
    }
    let rows: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let total_variance =
        rows.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>()).sum::<f64>() / count as f64;
    (mean, rows, total_variance)
}

/// Fit a PCA model with `m` components, `1 <= m <= min(dim, count)`.
pub fn pca_fit(vectors: &[Vec<f64>], m: usize) -> Result<PcaModel, StatsError> {
    if vectors.len() < 2 {
        return Err(StatsError::TooFewVectors);
    }
    let n = vectors[0].len();
    let count = vectors.len();
    if vectors.iter().any(|v| v.len() != n) {
        return Err(StatsError::DimensionMismatch {
            expected: n,
            found: vectors.iter().map(|v| v.len()).find(|&l| l != n).unwrap(),
        });
    }
    if m < 1 || m > n.min(count) {
        return Err(StatsError::BadComponentCount {
            requested: m,
            available: n.min(count),
        });
    }
    let (mean, rows, total_variance) = centered(vectors);

    // The Gram route only pays off when the dimension dwarfs the subject
    // count; it cannot produce eigenvectors for zero eigenvalues, so small
    // problems take the direct covariance.
    if count >= n || n <= 64 {
        let mut cov = vec![vec![0.0; n]; n];
        for r in &rows {
            for i in 0..n {
                for j in i..n {
                    cov[i][j] += r[i] * r[j];
                }
            }
        }
        for i in 0..n {
            for j in i..n {
                cov[i][j] /= count as f64;
                cov[j][i] = cov[i][j];
            }
        }
        let (values, mut vectors) = symmetric_eigen(&cov)?;
        let mut projection = Vec::with_capacity(m);
        for row in vectors.drain(..).take(m) {
            let mut row = row;
            fix_sign(&mut row);
            projection.push(row);
        }
        Ok(PcaModel {
            mean,
            projection,
            eigenvalues: values[..m].to_vec(),
            total_variance,
        })
    } else {
        // Gram trick: eigenpairs of (1/N) Xc Xc^T lift to covariance
        // eigenpairs for the nonzero eigenvalues.
        let mut gram = vec![vec![0.0; count]; count];
        for a in 0..count {
            for b in a..count {
                let dot: f64 = rows[a].iter().zip(&rows[b]).map(|(x, y)| x * y).sum();
                gram[a][b] = dot / count as f64;
                gram[b][a] = gram[a][b];
            }
        }
        let (values, units) = symmetric_eigen(&gram)?;
        let tolerance = 1e-12 * values.first().map(|v| v.max(1.0)).unwrap_or(1.0);
        let available = values.iter().filter(|&&l| l > tolerance).count();
        if m > available {
            return Err(StatsError::BadComponentCount {
                requested: m,
                available,
            });
        }
        let mut projection = Vec::with_capacity(m);
        for (lambda, u) in values.iter().zip(&units).take(m) {
            let norm = (count as f64 * lambda).sqrt();
            let mut row: Vec<f64> = (0..n)
                .map(|i| rows.iter().zip(u).map(|(r, &ui)| r[i] * ui).sum::<f64>() / norm)
                .collect();
            fix_sign(&mut row);
            projection.push(row);
        }
        Ok(PcaModel {
            mean,
            projection,
            eigenvalues: values[..m].to_vec(),
            total_variance,
        })
    }
}

/// Like `pca_fit`, clamping `m` to what the data can support. Returns the
/// model and the number of components actually used.
pub fn pca_fit_auto(vectors: &[Vec<f64>], m: usize) -> Result<(PcaModel, usize), StatsError> {
    if vectors.len() < 2 {
        return Err(StatsError::TooFewVectors);
    }
    let n = vectors[0].len();
    let mut m = m.clamp(1, n.min(vectors.len()));
    loop {
        match pca_fit(vectors, m) {
            Ok(model) => return Ok((model, m)),
            Err(StatsError::BadComponentCount { available, .. }) if available >= 1 && m > available => {
                m = available;
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_points_give_line_direction() {
        let a = vec![0.0, 0.0, 0.0];
        let b = vec![2.0, 0.0, 0.0];
        let model = pca_fit(&[a, b], 2).unwrap();
        // Variance along the separating line, nothing elsewhere.
        assert!((model.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!(model.eigenvalues[1].abs() < 1e-12);
        assert!((model.projection[0][0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_of_mean_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let model = pca_fit(&data, 3).unwrap();
        let projected_mean = model.project(&model.mean).unwrap();
        assert!(projected_mean.iter().all(|v| v.abs() < 1e-10));

        // Dataset mean of projections is the projection of the mean.
        let mut sum = vec![0.0; 3];
        for d in &data {
            for (s, v) in sum.iter_mut().zip(model.project(d).unwrap()) {
                *s += v;
            }
        }
        assert!(sum.iter().all(|v| (v / 20.0).abs() < 1e-10));
    }

    #[test]
    fn full_rank_projection_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let model = pca_fit(&data, 6).unwrap();
        for d in &data {
            let r = model.project(d).unwrap();
            let back = model.backproject(&r).unwrap();
            for (x, y) in d.iter().zip(&back) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn backproject_reference_points() {
        let data = vec![vec![1.0, 2.0], vec![3.0, 2.0], vec![2.0, 4.0]];
        let model = pca_fit(&data, 2).unwrap();
        let at_zero = model.backproject(&[0.0, 0.0]).unwrap();
        for (a, b) in at_zero.iter().zip(&model.mean) {
            assert!((a - b).abs() < 1e-12);
        }
        let along_first = model.backproject(&[1.0, 0.0]).unwrap();
        for ((a, m), w) in along_first.iter().zip(&model.mean).zip(&model.projection[0]) {
            assert!((a - (m + w)).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvalue_sum_matches_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..7).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let model = pca_fit(&data, 7).unwrap();
        let sum: f64 = model.eigenvalues.iter().sum();
        assert!((sum - model.total_variance).abs() < 1e-9);
    }

    #[test]
    fn gram_path_matches_direct_path() {
        // 4 vectors in 80 dims exercises the Gram route; the eigenpairs must
        // match a direct dense covariance decomposition.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 80;
        let data: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let gram_model = pca_fit(&data, 3).unwrap();

        // Direct covariance of the same data, eigenpairs via the solver.
        let (mean, rows, _) = centered(&data);
        let mut cov = vec![vec![0.0; n]; n];
        for r in &rows {
            for i in 0..n {
                for j in 0..n {
                    cov[i][j] += r[i] * r[j] / data.len() as f64;
                }
            }
        }
        let (values, vectors) = symmetric_eigen(&cov).unwrap();
        for k in 0..3 {
            assert!((gram_model.eigenvalues[k] - values[k]).abs() < 1e-10);
            let dot: f64 = gram_model.projection[k].iter().zip(&vectors[k]).map(|(a, b)| a * b).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-8);
        }
        assert_eq!(mean.len(), n);
    }

    #[test]
    fn rows_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let model = pca_fit(&data, 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let dot: f64 = model.projection[i].iter().zip(&model.projection[j]).map(|(a, b)| a * b).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-9);
            }
        }
        for pair in model.eigenvalues.windows(2) {
            assert!(pair[0] >= pair[1]);
        }
    }

    #[test]
    fn m_too_large_is_error() {
        let data = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(
            pca_fit(&data, 3),
            Err(StatsError::BadComponentCount { .. })
        ));
    }

    #[test]
    fn isotropic_sample_has_flat_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<Vec<f64>> = (0..10_000)
            .map(|_| {
                (0..4)
                    .map(|_| {
                        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                        let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                        (-2.0 * u.ln()).sqrt() * v.cos()
                    })
                    .collect()
            })
            .collect();
        let model = pca_fit(&data, 4).unwrap();
        for fraction in model.explained_fractions() {
            assert!((fraction - 0.25).abs() < 0.1);
        }
    }

    #[test]
    fn model_save_load_round_trip() {
        let data = vec![vec![1.0, 2.0, 0.5], vec![3.0, 2.5, -1.0], vec![2.0, 4.0, 0.25]];
        let model = pca_fit(&data, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pca.txt");
        model.save(&path).unwrap();
        let loaded = PcaModel::load(&path).unwrap();
        assert_eq!(loaded, model);
    }
}
