use super::MeshError;

/// Uniform Cartesian grid of `[0,1]^d` with `n` subdivisions per direction.
///
/// Nodes are indexed by multi-indices `0 <= j <= n`, linearized with the
/// first component varying fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CartesianGrid {
    dim: usize,
    n: usize,
}

impl CartesianGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self, MeshError> {
        if !(1..=3).contains(&dim) {
            return Err(MeshError::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if n == 0 {
            return Err(MeshError::InvalidGrid("zero subdivisions".into()));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// `h^d`, the volume weight of one node.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Nodes per direction, `n + 1`.
    pub fn side(&self) -> usize {
        self.n + 1
    }

    pub fn num_nodes(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn num_interior(&self) -> usize {
        (self.n - 1).pow(self.dim as u32)
    }

    /// Linear stride of direction `i`.
    pub fn stride(&self, i: usize) -> usize {
        self.side().pow(i as u32)
    }

    pub fn multi_index(&self, mut node: usize) -> [usize; 3] {
        let mut j = [0; 3];
        for c in j.iter_mut().take(self.dim) {
            *c = node % self.side();
            node /= self.side();
        }
        j
    }

    pub fn linear_index(&self, j: &[usize]) -> usize {
        j.iter()
            .take(self.dim)
            .enumerate()
            .map(|(i, &ji)| ji * self.stride(i))
            .sum()
    }

    /// Node coordinates `x_j = j h` (unused components are zero).
    pub fn coords(&self, node: usize) -> [f64; 3] {
        let j = self.multi_index(node);
        let h = self.h();
        [j[0] as f64 * h, j[1] as f64 * h, j[2] as f64 * h]
    }

    /// `j` lies on the index boundary: some component is `0` or `n`.
    pub fn is_boundary(&self, node: usize) -> bool {
        let j = self.multi_index(node);
        j[..self.dim].iter().any(|&c| c == 0 || c == self.n)
    }

    /// Neighbour in direction `i` shifted by +1, if it lies in the index set.
    pub fn forward(&self, node: usize, i: usize) -> Option<usize> {
        let j = self.multi_index(node);
        (j[i] < self.n).then(|| node + self.stride(i))
    }

    /// Neighbour in direction `i` shifted by -1, if it lies in the index set.
    pub fn backward(&self, node: usize, i: usize) -> Option<usize> {
        let j = self.multi_index(node);
        (j[i] > 0).then(|| node - self.stride(i))
    }

    /// Interior nodes in increasing linear order.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&k| !self.is_boundary(k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_two_cells() {
        let g = CartesianGrid::new(1, 2).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.interior_nodes(), vec![1]);
        let xs: Vec<f64> = (0..3).map(|k| g.coords(k)[0]).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn corner_only_grid() {
        let g = CartesianGrid::new(2, 1).unwrap();
        assert_eq!(g.num_nodes(), 4);
        assert!(g.interior_nodes().is_empty());
    }

    #[test]
    fn counts_match_enumeration() {
        for d in 1..=3 {
            for n in 1..=5 {
                let g = CartesianGrid::new(d, n).unwrap();
                let mut total = 0;
                let mut interior = 0;
                // brute-force enumeration of 0 <= j <= n
                let side = n + 1;
                for k in 0..side.pow(d as u32) {
                    let mut rest = k;
                    let mut inside = true;
                    for _ in 0..d {
                        let c = rest % side;
                        rest /= side;
                        inside &= c > 0 && c < n;
                    }
                    total += 1;
                    interior += inside as usize;
                }
                assert_eq!(g.num_nodes(), total);
                assert_eq!(g.num_interior(), interior);
                assert_eq!(g.interior_nodes().len(), interior);
            }
        }
        let g = CartesianGrid::new(2, 4).unwrap();
        assert_eq!((g.num_nodes(), g.num_interior()), (25, 9));
    }

    #[test]
    fn spacing_is_derived() {
        let g = CartesianGrid::new(3, 7).unwrap();
        assert_eq!(g.h() * g.n() as f64, 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CartesianGrid::new(0, 3).is_err());
        assert!(CartesianGrid::new(4, 3).is_err());
        assert!(CartesianGrid::new(2, 0).is_err());
    }

    #[test]
    fn shifts_respect_index_set() {
        let g = CartesianGrid::new(2, 3).unwrap();
        let k = g.linear_index(&[3, 1]);
        assert_eq!(g.forward(k, 0), None);
        assert_eq!(g.forward(k, 1), Some(g.linear_index(&[3, 2])));
        assert_eq!(g.backward(g.linear_index(&[0, 2]), 0), None);
    }
}
