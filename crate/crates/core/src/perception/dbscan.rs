use super::PerceptionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Noise,
    Cluster(usize),
}

impl Label {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Label::Cluster(c) => Some(c),
            Label::Noise => None,
        }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Density-based clustering with Euclidean distance.
///
/// A point's neighborhood includes itself. Points are visited in input order
/// and clusters are numbered in the order their first core point is met, so
/// the labeling is fully determined by the input order.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Result<Vec<Label>, PerceptionError> {
    if let Some(first) = points.first() {
        let dim = first.len();
        if let Some(bad) = points.iter().find(|p| p.len() != dim) {
            return Err(PerceptionError::DimensionMismatch { expected: dim, got: bad.len() });
        }
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(PerceptionError::InvalidParameter(format!("eps must be > 0, got {eps}")));
    }
    let min_pts = min_pts.max(1);
    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        (0..points.len()).filter(|&j| dist2(&points[i], &points[j]) <= eps2).collect()
    };

    let mut labels: Vec<Option<Label>> = vec![None; points.len()];
    let mut next = 0;
    for i in 0..points.len() {
        if labels[i].is_some() {
            continue;
        }
        let seeds = neighbors(i);
        if seeds.len() < min_pts {
            labels[i] = Some(Label::Noise);
            continue;
        }
        let cluster = Label::Cluster(next);
        next += 1;
        labels[i] = Some(cluster);
        let mut queue = seeds;
        let mut head = 0;
        while head < queue.len() {
            let j = queue[head];
            head += 1;
            match labels[j] {
                Some(Label::Noise) => labels[j] = Some(cluster),
                None => {
                    labels[j] = Some(cluster);
                    let more = neighbors(j);
                    if more.len() >= min_pts {
                        queue.extend(more);
                    }
                }
                Some(Label::Cluster(_)) => {}
            }
        }
    }
    Ok(labels.into_iter().map(|l| l.unwrap_or(Label::Noise)).collect())
}
