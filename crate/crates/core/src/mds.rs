//! Classical (Torgerson) multidimensional scaling.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::model::NodeKey;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    node_ids: Vec<NodeKey>,
    dim: usize,
    coords: Vec<f64>,
    /// The `dim` largest eigenvalues of the double-centred matrix, unclamped.
    pub eigenvalues: Vec<f64>,
    /// Total magnitude of negative eigenvalues over the whole spectrum; zero
    /// for a Euclidean input.
    pub clamped_mass: f64,
}

impl Embedding {
    /// Wraps precomputed coordinates, one row per node. No spectrum is
    /// recorded.
    pub fn from_points(node_ids: Vec<NodeKey>, points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if node_ids.len() != points.len() || dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidConfig(
                "points must be non-empty rows of equal length, one per node".into(),
            ));
        }
        Ok(Self {
            node_ids,
            dim,
            coords: points.concat(),
            eigenvalues: vec![],
            clamped_mass: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_ids(&self) -> &[NodeKey] {
        &self.node_ids
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Euclidean distance between two embedded nodes.
    pub fn distance(&self, p: usize, q: usize) -> f64 {
        self.point(p)
            .iter()
            .zip(self.point(q))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// CSV `day_index,slot_index,x,y[,...]`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("day_index,slot_index");
        for c in 0..self.dim {
            out.push(',');
            out.push_str(match c {
                0 => "x",
                1 => "y",
                2 => "z",
                _ => "w",
            });
            if c >= 3 {
                out.push_str(&c.to_string());
            }
        }
        out.push('\n');
        for (key, p) in self.node_ids.iter().zip(self.points()) {
            out.push_str(&format!("{},{}", key.day, key.slot));
            for v in p {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Embeds the semantic distance matrix.
pub fn embed(d: &DistanceMatrix, dim: usize) -> Result<Embedding> {
    let n = d.len();
    let m = DMatrix::from_fn(n, n, |p, q| d.get(p, q));
    classical_mds(d.node_ids().to_vec(), &m, dim)
}

/// Classical MDS of an arbitrary symmetric dissimilarity matrix.
///
/// Coordinates are the top `dim` eigenvectors of `-1/2 J D∘D J`, scaled by the
/// square root of their eigenvalue clamped at zero. Each eigenvector is
/// oriented so its first non-negligible component is positive.
pub fn classical_mds(node_ids: Vec<NodeKey>, dissim: &DMatrix<f64>, dim: usize) -> Result<Embedding> {
    let n = dissim.nrows();
    if n < 2 {
        return Err(Error::TooFewNodes(n));
    }
    if dissim.ncols() != n || node_ids.len() != n {
        return Err(Error::InvalidConfig("dissimilarity matrix is not square".into()));
    }
    if dim == 0 || dim > n {
        return Err(Error::InvalidDimension { dim, nodes: n });
    }

    let sq = dissim.map(|v| v * v);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand)
    });

    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let clamped_mass = eig.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();

    let mut coords = vec![0.0; n * dim];
    let mut eigenvalues = Vec::with_capacity(dim);
    for (c, &k) in order.iter().take(dim).enumerate() {
        let lambda = eig.eigenvalues[k];
        eigenvalues.push(lambda);
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-9 * vmax) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        let scale = lambda.max(0.0).sqrt();
        let mean = v.iter().sum::<f64>() / n as f64;
        for (i, x) in v.iter().enumerate() {
            coords[i * dim + c] = (x - mean) * scale;
        }
    }

    Ok(Embedding {
        node_ids,
        dim,
        coords,
        eigenvalues,
        clamped_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<NodeKey> {
        (0..n).map(|i| NodeKey::new(i, 0)).collect()
    }

    #[test]
    fn two_points() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 4.0, 4.0, 0.0]);
        let e = classical_mds(ids(2), &m, 2).unwrap();
        let (a, b) = (e.point(0), e.point(1));
        assert!((a[0].abs() - 2.0).abs() < 1e-12 && (b[0].abs() - 2.0).abs() < 1e-12);
        assert!((a[0] + b[0]).abs() < 1e-12);
        assert!(a[1].abs() < 1e-12 && b[1].abs() < 1e-12);
        assert!(a[0] > 0.0, "first component is oriented positive");
    }

    #[test]
    fn equilateral_triangle() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        let e = classical_mds(ids(3), &m, 2).unwrap();
        for p in 0..3 {
            for q in 0..p {
                assert!((e.distance(p, q) - 1.0).abs() < 1e-9);
            }
        }
        assert!(e.clamped_mass < 1e-12);
    }

    #[test]
    fn from_points_checks_shape() {
        let e = Embedding::from_points(ids(2), &[vec![1.0, 2.0], vec![4.0, 6.0]]).unwrap();
        assert_eq!(e.dim(), 2);
        assert_eq!(e.distance(0, 1), 5.0);
        assert!(Embedding::from_points(ids(2), &[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(Embedding::from_points(ids(3), &[vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn centered_output() {
        let pts: [(f64, f64); 4] = [(0.0, 0.0), (3.0, 1.0), (-1.0, 2.5), (0.5, -2.0)];
        let m = DMatrix::from_fn(4, 4, |i, j| {
            let (a, b) = (pts[i], pts[j]);
            ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
        });
        let e = classical_mds(ids(4), &m, 2).unwrap();
        for c in 0..2 {
            let mean: f64 = e.points().map(|p| p[c]).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn non_euclidean_input_reports_clamped_mass() {
        // the equidistant five-point simplex is Euclidean but needs four
        // dimensions; the top two eigenvalues tie
        let n = 5;
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 3.0 });
        let e = classical_mds(ids(n), &m, 2).unwrap();
        assert_eq!(e.eigenvalues.len(), 2);
        assert!(e.eigenvalues.iter().all(|l| (l - 4.5).abs() < 1e-9));
        assert!(e.clamped_mass < 1e-9);

        // a metric that is not Euclidean: the 4-cycle with unit edges and
        // diagonals of 2 has a negative eigenvalue after double centring
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, 1.0, 2.0, 1.0, 1.0, 0.0, 1.0, 2.0, 2.0, 1.0, 0.0, 1.0, 1.0, 2.0, 1.0, 0.0],
        );
        let e = classical_mds(ids(4), &m, 2).unwrap();
        assert!(e.clamped_mass > 0.1);
    }

    #[test]
    fn rejects_bad_dimension() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(
            classical_mds(ids(2), &m, 3),
            Err(Error::InvalidDimension { dim: 3, nodes: 2 })
        ));
        let m1 = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert_eq!(classical_mds(ids(1), &m1, 1), Err(Error::TooFewNodes(1)));
    }

    #[test]
    fn csv_layout() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 4.0, 4.0, 0.0]);
        let e = classical_mds(vec![NodeKey::new(0, 3), NodeKey::new(1, 3)], &m, 2).unwrap();
        let csv = e.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("day_index,slot_index,x,y"));
        assert!(lines.next().unwrap().starts_with("0,3,"));
    }
}
