use crate::measure::AtomicMeasure;

/// Mass carried by atoms outside `[lo, hi]`.
pub fn mass_outside(mu: &AtomicMeasure, lo: f64, hi: f64) -> f64 {
    mu.iter().filter(|&(x, _)| x < lo || x > hi).map(|(_, m)| m).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

/// Groups of heavy atoms. An atom is heavy if it holds more than
/// `fraction` of the total mass; heavy atoms closer than `gap` to their
/// neighbour share a group, and groups holding more than `fraction` of the
/// total are returned.
pub fn mass_clusters(mu: &AtomicMeasure, gap: f64, fraction: f64) -> Vec<Cluster> {
    let cut = fraction * mu.total_mass();
    let mut groups: Vec<Cluster> = Vec::new();
    for (x, m) in mu.iter().filter(|&(_, m)| m > cut) {
        match groups.last_mut() {
            Some(c) if x - c.hi <= gap => {
                c.hi = x;
                c.mass += m;
            }
            _ => groups.push(Cluster { lo: x, hi: x, mass: m }),
        }
    }
    groups.retain(|c| c.mass > cut);
    groups
}
