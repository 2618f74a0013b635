use crate::linalg::sq_dist;

/// Unit-space distance under which two points count as the same point.
pub const DUPLICATE_TOL: f64 = 1e-10;

/// Set of evaluated unit-space points supporting near-duplicate lookup.
///
/// Points are kept sorted on their first coordinate so a query only scans
/// the slab `|p₀ − q₀| ≤ tol`.
#[derive(Debug, Clone, Default)]
pub struct PointSet {
    keys: Vec<(f64, usize)>,
    points: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn insert(&mut self, p: &[f64]) {
        let key = p.first().copied().unwrap_or(0.0);
        let pos = self.keys.partition_point(|&(k, _)| k < key);
        self.keys.insert(pos, (key, self.points.len()));
        self.points.push(p.to_vec());
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let key = p.first().copied().unwrap_or(0.0);
        let start = self.keys.partition_point(|&(k, _)| k < key - DUPLICATE_TOL);
        self.keys[start..]
            .iter()
            .take_while(|&&(k, _)| k <= key + DUPLICATE_TOL)
            .any(|&(_, i)| sq_dist(&self.points[i], p) <= DUPLICATE_TOL * DUPLICATE_TOL)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_near_duplicates_only() {
        let mut set = PointSet::new();
        set.insert(&[0.6, 0.5]);
        set.insert(&[0.1, 0.2]);
        set.insert(&[0.6, 0.9]);
        assert!(set.contains(&[0.6 + 1e-12, 0.5]));
        assert!(set.contains(&[0.1, 0.2]));
        assert!(!set.contains(&[0.6, 0.7]));
        assert!(!set.contains(&[0.6 + 1e-9, 0.5]));
        assert_eq!(set.len(), 3);
    }
}
