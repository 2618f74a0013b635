use crate::linalg::sq_dist;

/// Parameters of the local training-subset rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetRule {
    /// Radius is `radius_factor · poll_size · √D`.
    pub radius_factor: f64,
    /// Minimum subset size (capped by the history size).
    pub min_points: usize,
    /// Maximum size is `cap_base + cap_per_dim · D`.
    pub cap_base: usize,
    pub cap_per_dim: usize,
}

impl Default for SubsetRule {
    fn default() -> Self {
        Self { radius_factor: 5.0, min_points: 20, cap_base: 50, cap_per_dim: 10 }
    }
}

impl SubsetRule {
    pub fn cap(&self, dim: usize) -> usize {
        self.cap_base + self.cap_per_dim * dim
    }
}

/// Picks the local training set around the incumbent. Returns indices into
/// `points`, nearest first (ties by index). `incumbent_index` is always kept.
pub fn select_training_subset(
    points: &[&[f64]],
    incumbent: &[f64],
    incumbent_index: usize,
    poll_size: f64,
    rule: &SubsetRule,
) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    let dim = incumbent.len();
    let radius = rule.radius_factor * poll_size * (dim as f64).sqrt();
    let mut by_distance: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (sq_dist(p, incumbent), i))
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let inside = by_distance.partition_point(|&(d2, _)| d2 <= radius * radius);
    let floor = rule.min_points.min(points.len());
    let count = inside.max(floor).min(rule.cap(dim));
    let mut chosen: Vec<usize> = by_distance[..count].iter().map(|&(_, i)| i).collect();
    if incumbent_index < points.len() && !chosen.contains(&incumbent_index) {
        // Only reachable when duplicates at distance zero crowd the cap.
        chosen.pop();
        chosen.insert(0, incumbent_index);
    }
    chosen
}
