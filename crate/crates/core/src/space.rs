//! Finite discrete metric spaces with integer metrics.
//!
//! A [`MetricSpace`] is a finite truncation of an infinite bounded-geometry
//! space. Besides the metric it remembers which points sit on the truncation
//! boundary and, for a chosen `margin`, the *core region*
//! `{ x : B(x, margin) contains no boundary point }`. Diagnostics quantify only
//! over core points, where balls of the working radius look exactly like
//! balls in the infinite space.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default upper bound on the number of points any constructor will build.
pub const DEFAULT_POINT_CAP: usize = 6000;

/// Spaces up to this size get an exhaustive triangle-inequality check.
const EXHAUSTIVE_TRIANGLE_LIMIT: usize = 500;
const SAMPLED_TRIPLES: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricSpace {
    len: usize,
    dist: Vec<u32>,
    labels: Vec<String>,
    edges: Option<Vec<(usize, usize)>>,
    boundary: Vec<usize>,
    margin: u32,
    core: Vec<usize>,
}

/// `M(C) = max_x |B(x, C)|` for `C = 0..=max_radius`.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GeometryProfile {
    pub radii: Vec<u32>,
    pub counts: Vec<usize>,
}

impl GeometryProfile {
    pub fn count_at(&self, radius: u32) -> Option<usize> {
        self.radii
            .iter()
            .position(|&r| r == radius)
            .map(|i| self.counts[i])
    }

    pub fn is_monotone(&self) -> bool {
        self.counts.windows(2).all(|w| w[0] <= w[1])
    }
}

impl MetricSpace {
    /// Points `0..=length` on a line, `d(i, j) = |i − j|`.
    pub fn path(length: usize) -> Result<Self> {
        Self::path_with_cap(length, DEFAULT_POINT_CAP)
    }

    pub fn path_with_cap(length: usize, cap: usize) -> Result<Self> {
        if length < 1 {
            return Err(Error::InvalidParameter(format!(
                "path length must be at least 1, got {length}"
            )));
        }
        let len = length + 1;
        check_cap(len, cap)?;
        let mut dist = vec![0; len * len];
        for i in 0..len {
            for j in 0..len {
                dist[i * len + j] = i.abs_diff(j) as u32;
            }
        }
        let labels = (0..len).map(|i| i.to_string()).collect();
        let edges = (0..length).map(|i| (i, i + 1)).collect();
        Ok(Self::assemble(
            len,
            dist,
            labels,
            Some(edges),
            vec![0, length],
        ))
    }

    /// The box `{0..side}^dim` of `Z^dim` with the L1 (word) metric.
    pub fn grid(dim: usize, side: usize) -> Result<Self> {
        Self::grid_with_cap(dim, side, DEFAULT_POINT_CAP)
    }

    pub fn grid_with_cap(dim: usize, side: usize, cap: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!(
                "grid dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if side < 1 {
            return Err(Error::InvalidParameter(
                "grid side must be at least 1".into(),
            ));
        }
        let len = side.checked_pow(dim as u32).ok_or(Error::TooLarge {
            requested: usize::MAX,
            cap,
        })?;
        check_cap(len, cap)?;

        let coords: Vec<Vec<usize>> = (0..len)
            .map(|mut p| {
                let mut c = vec![0; dim];
                for slot in c.iter_mut().rev() {
                    *slot = p % side;
                    p /= side;
                }
                c
            })
            .collect();
        let mut dist = vec![0; len * len];
        for i in 0..len {
            for j in 0..len {
                dist[i * len + j] = coords[i]
                    .iter()
                    .zip(&coords[j])
                    .map(|(a, b)| a.abs_diff(*b) as u32)
                    .sum();
            }
        }
        let mut edges = Vec::new();
        for i in 0..len {
            for j in (i + 1)..len {
                if dist[i * len + j] == 1 {
                    edges.push((i, j));
                }
            }
        }
        let labels = coords
            .iter()
            .map(|c| {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                format!("({})", parts.join(","))
            })
            .collect();
        let boundary = if side == 1 {
            vec![0]
        } else {
            (0..len)
                .filter(|&p| coords[p].iter().any(|&v| v == 0 || v == side - 1))
                .collect()
        };
        Ok(Self::assemble(len, dist, labels, Some(edges), boundary))
    }

    /// Ball of the given radius around the identity in the Cayley graph of the
    /// free group of the given rank, with respect to the free generators.
    ///
    /// Generators are labelled `a, b, c, …` and their inverses `A, B, C, …`.
    /// Words of maximal length form the truncation boundary.
    pub fn free_group_ball(rank: usize, radius: usize) -> Result<Self> {
        Self::free_group_ball_with_cap(rank, radius, DEFAULT_POINT_CAP)
    }

    pub fn free_group_ball_with_cap(rank: usize, radius: usize, cap: usize) -> Result<Self> {
        if rank < 1 || radius < 1 {
            return Err(Error::InvalidParameter(format!(
                "free group ball needs rank >= 1 and radius >= 1, got rank {rank}, radius {radius}"
            )));
        }
        let requested = free_group_ball_size(rank, radius).unwrap_or(usize::MAX);
        check_cap(requested, cap)?;

        let letters = 2 * rank;
        // Word = list of letters; letter 2k is generator k, 2k + 1 its inverse.
        let mut words: Vec<Vec<usize>> = vec![Vec::new()];
        let mut edges = Vec::new();
        let mut frontier = vec![0usize];
        for _ in 0..radius {
            let mut next = Vec::new();
            for &w in &frontier {
                let last = words[w].last().copied();
                for s in 0..letters {
                    if last == Some(s ^ 1) {
                        continue;
                    }
                    let mut word = words[w].clone();
                    word.push(s);
                    let id = words.len();
                    words.push(word);
                    edges.push((w, id));
                    next.push(id);
                }
            }
            frontier = next;
        }
        let len = words.len();
        let labels = words.iter().map(|w| word_label(w)).collect();
        let dist = bfs_all_pairs(len, &edges)
            .ok_or_else(|| Error::InvalidMetric("free group ball is disconnected".into()))?;
        Ok(Self::assemble(len, dist, labels, Some(edges), frontier))
    }

    /// Metric derived by BFS from an undirected edge list.
    pub fn from_edges(
        len: usize,
        edges: Vec<(usize, usize)>,
        labels: Option<Vec<String>>,
        boundary: Vec<usize>,
    ) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidParameter(
                "space needs at least one point".into(),
            ));
        }
        check_cap(len, DEFAULT_POINT_CAP)?;
        for &(a, b) in &edges {
            for p in [a, b] {
                if p >= len {
                    return Err(Error::PointOutOfRange { point: p, len });
                }
            }
        }
        let dist = bfs_all_pairs(len, &edges)
            .ok_or_else(|| Error::InvalidMetric("edge graph is disconnected".into()))?;
        let labels = checked_labels(len, labels)?;
        let boundary = checked_boundary(len, boundary)?;
        Ok(Self::assemble(len, dist, labels, Some(edges), boundary))
    }

    /// Explicit metric matrix. Validates zero diagonal, positivity off the
    /// diagonal, symmetry and the triangle inequality (exhaustively up to 500
    /// points, on a fixed-seed sample of triples above that).
    pub fn from_metric(
        metric: Vec<Vec<u32>>,
        labels: Option<Vec<String>>,
        boundary: Vec<usize>,
    ) -> Result<Self> {
        let len = metric.len();
        if len == 0 {
            return Err(Error::InvalidParameter(
                "space needs at least one point".into(),
            ));
        }
        check_cap(len, DEFAULT_POINT_CAP)?;
        let mut dist = Vec::with_capacity(len * len);
        for (i, row) in metric.iter().enumerate() {
            if row.len() != len {
                return Err(Error::InvalidMetric(format!(
                    "row {i} has {} entries, expected {len}",
                    row.len()
                )));
            }
            dist.extend_from_slice(row);
        }
        let labels = checked_labels(len, labels)?;
        let boundary = checked_boundary(len, boundary)?;
        let space = Self::assemble(len, dist, labels, None, boundary);
        space.validate_metric()?;
        Ok(space)
    }

    fn assemble(
        len: usize,
        dist: Vec<u32>,
        labels: Vec<String>,
        edges: Option<Vec<(usize, usize)>>,
        boundary: Vec<usize>,
    ) -> Self {
        let mut space = Self {
            len,
            dist,
            labels,
            edges,
            boundary,
            margin: 0,
            core: Vec::new(),
        };
        space.core = space.compute_core(0);
        space
    }

    /// Same space with the core region recomputed for `margin`.
    pub fn with_margin(mut self, margin: u32) -> Self {
        self.margin = margin;
        self.core = self.compute_core(margin);
        self
    }

    fn compute_core(&self, margin: u32) -> Vec<usize> {
        (0..self.len)
            .filter(|&x| self.boundary.iter().all(|&b| self.distance(x, b) > margin))
            .collect()
    }

    pub fn validate_metric(&self) -> Result<()> {
        let n = self.len;
        for x in 0..n {
            if self.distance(x, x) != 0 {
                return Err(Error::InvalidMetric(format!("d({x},{x}) != 0")));
            }
            for y in (x + 1)..n {
                let d = self.distance(x, y);
                if d != self.distance(y, x) {
                    return Err(Error::InvalidMetric(format!("d({x},{y}) != d({y},{x})")));
                }
                if d == 0 {
                    return Err(Error::InvalidMetric(format!(
                        "d({x},{y}) = 0 for distinct points"
                    )));
                }
            }
        }
        let triangle = |x: usize, y: usize, z: usize| -> Result<()> {
            if self.distance(x, z) as u64 > self.distance(x, y) as u64 + self.distance(y, z) as u64
            {
                return Err(Error::InvalidMetric(format!(
                    "triangle inequality fails for ({x},{y},{z})"
                )));
            }
            Ok(())
        };
        if n <= EXHAUSTIVE_TRIANGLE_LIMIT {
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        triangle(x, y, z)?;
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x7472_6961_6e67_6c65);
            for _ in 0..SAMPLED_TRIPLES {
                triangle(
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                )?;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn distance(&self, x: usize, y: usize) -> u32 {
        self.dist[x * self.len + y]
    }

    pub fn check_point(&self, x: usize) -> Result<()> {
        if x >= self.len {
            return Err(Error::PointOutOfRange {
                point: x,
                len: self.len,
            });
        }
        Ok(())
    }

    /// Closed ball `{ y : d(x, y) <= radius }`, ascending.
    pub fn ball(&self, x: usize, radius: u32) -> Vec<usize> {
        self.distance_row(x)
            .iter()
            .enumerate()
            .filter(|(_, &d)| d <= radius)
            .map(|(y, _)| y)
            .collect()
    }

    pub fn ball_size(&self, x: usize, radius: u32) -> usize {
        self.distance_row(x)
            .iter()
            .filter(|&&d| d <= radius)
            .count()
    }

    fn distance_row(&self, x: usize) -> &[u32] {
        &self.dist[x * self.len..(x + 1) * self.len]
    }

    pub fn diameter(&self) -> u32 {
        self.dist.iter().copied().max().unwrap_or(0)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, x: usize) -> &str {
        &self.labels[x]
    }

    pub fn edges(&self) -> Option<&[(usize, usize)]> {
        self.edges.as_deref()
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn margin(&self) -> u32 {
        self.margin
    }

    pub fn core(&self) -> &[usize] {
        &self.core
    }

    pub fn is_core(&self, x: usize) -> bool {
        self.core.binary_search(&x).is_ok()
    }

    /// Distinct core pairs `(x, y)`, `x < y`, with `d(x, y) < window`, in
    /// lexicographic order.
    pub fn core_pairs_within(&self, window: u64) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for (i, &x) in self.core.iter().enumerate() {
            for &y in &self.core[i + 1..] {
                if (self.distance(x, y) as u64) < window {
                    pairs.push((x, y));
                }
            }
        }
        pairs
    }

    pub fn geometry_profile(&self, max_radius: u32) -> GeometryProfile {
        let radii: Vec<u32> = (0..=max_radius).collect();
        let counts = radii
            .iter()
            .map(|&c| {
                (0..self.len)
                    .map(|x| self.ball_size(x, c))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        GeometryProfile { radii, counts }
    }
}

/// `1 + 2r · Σ_{k<R} (2r − 1)^k`, the number of reduced words of length ≤ R.
pub fn free_group_ball_size(rank: usize, radius: usize) -> Option<usize> {
    let branch = 2 * rank - 1;
    let mut total: usize = 1;
    let mut shell: usize = 2 * rank;
    for _ in 0..radius {
        total = total.checked_add(shell)?;
        shell = shell.checked_mul(branch)?;
    }
    Some(total)
}

fn word_label(word: &[usize]) -> String {
    if word.is_empty() {
        return "e".to_string();
    }
    word.iter()
        .map(|&s| {
            let g = s / 2;
            let inverse = s % 2 == 1;
            if g < 26 {
                let c = (b'a' + g as u8) as char;
                if inverse {
                    c.to_ascii_uppercase().to_string()
                } else {
                    c.to_string()
                }
            } else if inverse {
                format!("G{g}")
            } else {
                format!("g{g}")
            }
        })
        .collect()
}

fn check_cap(len: usize, cap: usize) -> Result<()> {
    if len > cap {
        return Err(Error::TooLarge {
            requested: len,
            cap,
        });
    }
    Ok(())
}

fn checked_labels(len: usize, labels: Option<Vec<String>>) -> Result<Vec<String>> {
    match labels {
        Some(l) if l.len() != len => Err(Error::Format(format!(
            "{} labels for {len} points",
            l.len()
        ))),
        Some(l) => Ok(l),
        None => Ok((0..len).map(|i| i.to_string()).collect()),
    }
}

fn checked_boundary(len: usize, mut boundary: Vec<usize>) -> Result<Vec<usize>> {
    if let Some(&p) = boundary.iter().find(|&&p| p >= len) {
        return Err(Error::PointOutOfRange { point: p, len });
    }
    boundary.sort_unstable();
    boundary.dedup();
    Ok(boundary)
}

/// All-pairs hop distances, or `None` when the graph is disconnected.
fn bfs_all_pairs(len: usize, edges: &[(usize, usize)]) -> Option<Vec<u32>> {
    let mut adjacency = vec![Vec::new(); len];
    for &(a, b) in edges {
        if a != b {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
        list.dedup();
    }
    let mut dist = vec![u32::MAX; len * len];
    let mut queue = VecDeque::new();
    for source in 0..len {
        let row = &mut dist[source * len..(source + 1) * len];
        row[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = row[u];
            for &v in &adjacency[u] {
                if row[v] == u32::MAX {
                    row[v] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        if row.contains(&u32::MAX) {
            return None;
        }
    }
    Some(dist)
}
