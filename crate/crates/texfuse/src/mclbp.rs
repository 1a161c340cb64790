//! Multi-scale co-occurrence of uniform LBPs with globally rotation-invariant
//! pooling: orbit construction under circular rotation, plus sum, moment and
//! DFT pooling encoders and the scale-correlation analysis.

use crate::error::{Result, TexError};
use crate::imgcore::GrayImage;
use crate::lbp::{lbp_code_with_offsets, neighbor_offsets, ror, LbpConfig, PatternIndexTable};

/// Number of rotation orbits of the 59x59 co-occurrence pattern space at P=8,
/// verified against brute-force orbit enumeration: 9 singletons (both halves
/// rotation-fixed) plus 434 orbits of size 8.
pub const CO_GROUP_COUNT_P8: usize = 443;

/// Orbit decomposition of a pattern space under circular rotation. Within a
/// group, advancing rotation by one step maps member `j` to member
/// `(j + 1) mod size`.
#[derive(Debug, Clone)]
pub struct GroupPartition {
    pub pattern_space_size: usize,
    pub group_of: Vec<usize>,
    pub groups: Vec<Vec<usize>>,
}

impl GroupPartition {
    fn from_rotation<F: Fn(usize) -> usize>(space: usize, rotate: F) -> Self {
        let mut group_of = vec![usize::MAX; space];
        let mut groups = Vec::new();
        // Start each orbit from its numerically smallest member so the member
        // ordering by rotation step is canonical.
        for start in 0..space {
            if group_of[start] != usize::MAX {
                continue;
            }
            let mut members = Vec::new();
            let mut cur = start;
            loop {
                members.push(cur);
                group_of[cur] = groups.len();
                cur = rotate(cur);
                if cur == start {
                    break;
                }
            }
            groups.push(members);
        }
        Self {
            pattern_space_size: space,
            group_of,
            groups,
        }
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }
}

/// One-step rotation on the uniform index space [0, 59): uniform indices
/// follow their code's circular shift, the non-uniform bucket is a fixed
/// point.
fn rotate_uniform_index(table: &PatternIndexTable, idx: usize) -> usize {
    let bucket = table.uniform_count() as usize;
    if idx == bucket {
        return bucket;
    }
    // Uniform codes rank in ascending numeric order; recover the code.
    let p = table.p();
    let code = (0..1u32 << p)
        .filter(|&c| table.uniform_index(c) != bucket as u32)
        .nth(idx)
        .expect("index within uniform range");
    table.uniform_index(ror(code, 1, p)) as usize
}

/// Partition of the uniform pattern space (plus bucket) into rotation orbits.
/// For P=8: 9 uniform groups of sizes {1, 8x7, 1} plus the bucket singleton.
pub fn build_groups_single(p: u32) -> Result<GroupPartition> {
    if ![4u32, 8, 16, 24].contains(&p) {
        return Err(TexError::InvalidArgument(format!(
            "unsupported neighbor count {p}"
        )));
    }
    let table = PatternIndexTable::new(p);
    // Precompute the rotation map once; nth() scans are quadratic otherwise.
    let map: Vec<usize> = (0..table.dimension())
        .map(|i| rotate_uniform_index(&table, i))
        .collect();
    Ok(GroupPartition::from_rotation(table.dimension(), |i| map[i]))
}

/// Partition of the co-occurrence pattern space (59x59 for P=8) into orbits
/// under simultaneous one-step rotation of both constituent patterns.
pub fn build_groups_co(p: u32) -> Result<GroupPartition> {
    if p != 8 {
        return Err(TexError::InvalidArgument(
            "co-occurrence groups are defined for P=8".into(),
        ));
    }
    let table = PatternIndexTable::new(p);
    let dim = table.dimension();
    let map: Vec<usize> = (0..dim)
        .map(|i| rotate_uniform_index(&table, i))
        .collect();
    Ok(GroupPartition::from_rotation(dim * dim, move |c| {
        let (i1, i2) = (c / dim, c % dim);
        map[i1] * dim + map[i2]
    }))
}

/// Co-occurrence histogram of two uniform LBP scales at the same centers,
/// start bit 0 for both; 59x59 = 3481 bins, L1-normalized.
pub fn colbp_uu(
    img: &GrayImage,
    s1: &LbpConfig,
    s2: &LbpConfig,
    table: &PatternIndexTable,
) -> Result<Vec<f64>> {
    colbp_uu_impl(img, s1, s2, table, false)
}

/// CLBP-style center-gray-level split: two co-histogram halves, selected by
/// whether the center pixel is at least the global mean. Dimension doubles to
/// 2 x 3481; still L1-normalized overall.
pub fn colbp_uu_center_split(
    img: &GrayImage,
    s1: &LbpConfig,
    s2: &LbpConfig,
    table: &PatternIndexTable,
) -> Result<Vec<f64>> {
    colbp_uu_impl(img, s1, s2, table, true)
}

fn colbp_uu_impl(
    img: &GrayImage,
    s1: &LbpConfig,
    s2: &LbpConfig,
    table: &PatternIndexTable,
    center_split: bool,
) -> Result<Vec<f64>> {
    if s1.neighbors != table.p() || s2.neighbors != table.p() {
        return Err(TexError::InvalidArgument(
            "both scales must share the table's neighbor count".into(),
        ));
    }
    let margin = s1.margin().max(s2.margin());
    if img.width() < 2 * margin + 1 || img.height() < 2 * margin + 1 {
        return Err(TexError::ImageTooSmall(format!(
            "{}x{} leaves no valid centers at radius {}",
            img.width(),
            img.height(),
            s1.radius.max(s2.radius)
        )));
    }
    let dim = table.dimension();
    let half = dim * dim;
    let halves = if center_split { 2 } else { 1 };
    let mean = img.data().iter().sum::<f64>() / img.data().len() as f64;
    let off1 = neighbor_offsets(s1);
    let off2 = neighbor_offsets(s2);
    let mut hist = vec![0.0; halves * half];
    let mut count = 0u64;
    for y in margin..img.height() - margin {
        for x in margin..img.width() - margin {
            let c1 = lbp_code_with_offsets(img, x as f64, y as f64, s1, &off1)?;
            let c2 = lbp_code_with_offsets(img, x as f64, y as f64, s2, &off2)?;
            let i1 = table.uniform_index(c1) as usize;
            let i2 = table.uniform_index(c2) as usize;
            let offset = if center_split && img.get(x, y) >= mean {
                half
            } else {
                0
            };
            hist[offset + i1 * dim + i2] += 1.0;
            count += 1;
        }
    }
    for h in &mut hist {
        *h /= count as f64;
    }
    Ok(hist)
}

/// Pooled rotation-invariant feature.
#[derive(Debug, Clone, PartialEq)]
pub enum Pooling {
    Sum,
    Moment { sigma1: f64 },
    Dft,
}

/// Order-independent sum so pooled values are exactly invariant under any
/// permutation (in particular circular shifts) of a group's member values.
fn sorted_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// One value per group: the cumulative probability of its members.
pub fn pool_sum(hist: &[f64], partition: &GroupPartition) -> Result<Vec<f64>> {
    check_dims(hist, partition)?;
    Ok(partition
        .groups
        .iter()
        .map(|g| sorted_sum(g.iter().map(|&i| hist[i]).collect()))
        .collect())
}

/// Per group `[m, sigma1 * sum_j (h_j - m/N)^2]`; dimension `2 * #groups`.
pub fn pool_moment(hist: &[f64], partition: &GroupPartition, sigma1: f64) -> Result<Vec<f64>> {
    check_dims(hist, partition)?;
    if sigma1 <= 0.0 {
        return Err(TexError::InvalidArgument(format!(
            "sigma1 must be positive, got {sigma1}"
        )));
    }
    let mut out = Vec::with_capacity(2 * partition.group_count());
    for g in &partition.groups {
        let m = sorted_sum(g.iter().map(|&i| hist[i]).collect());
        let mean = m / g.len() as f64;
        let var = sorted_sum(
            g.iter()
                .map(|&i| (hist[i] - mean) * (hist[i] - mean))
                .collect(),
        );
        out.push(m);
        out.push(sigma1 * var);
    }
    Ok(out)
}

/// DFT magnitudes `M(0..floor(N/2))` of each group's member sequence in
/// rotation-step order.
pub fn pool_dft(hist: &[f64], partition: &GroupPartition) -> Result<Vec<f64>> {
    check_dims(hist, partition)?;
    let mut out = Vec::new();
    for g in &partition.groups {
        let n = g.len();
        for k in 0..=n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &idx) in g.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64;
                re += hist[idx] * angle.cos();
                im += hist[idx] * angle.sin();
            }
            out.push((re * re + im * im).sqrt());
        }
    }
    Ok(out)
}

/// Pooled dimension for a partition: sum (group count), moment
/// (2 * group count) or DFT (sum of floor(N/2)+1 over groups).
pub fn pooled_dimension(partition: &GroupPartition, pooling: &Pooling) -> usize {
    match pooling {
        Pooling::Sum => partition.group_count(),
        Pooling::Moment { .. } => 2 * partition.group_count(),
        Pooling::Dft => partition.groups.iter().map(|g| g.len() / 2 + 1).sum(),
    }
}

pub fn pool(hist: &[f64], partition: &GroupPartition, pooling: &Pooling) -> Result<Vec<f64>> {
    match pooling {
        Pooling::Sum => pool_sum(hist, partition),
        Pooling::Moment { sigma1 } => pool_moment(hist, partition, *sigma1),
        Pooling::Dft => pool_dft(hist, partition),
    }
}

fn check_dims(hist: &[f64], partition: &GroupPartition) -> Result<()> {
    if hist.len() != partition.pattern_space_size {
        return Err(TexError::DimensionMismatch {
            expected: partition.pattern_space_size,
            got: hist.len(),
        });
    }
    Ok(())
}

/// Mutual information `I(X;Y) = H(X) + H(Y) - H(X,Y)` in bits of a joint
/// 2-D histogram stored row-major (`rows x cols`).
pub fn mutual_information(joint: &[f64], rows: usize, cols: usize) -> Result<f64> {
    if joint.len() != rows * cols {
        return Err(TexError::DimensionMismatch {
            expected: rows * cols,
            got: joint.len(),
        });
    }
    if joint.iter().any(|v| *v < 0.0) {
        return Err(TexError::InvalidArgument(
            "joint histogram has negative entries".into(),
        ));
    }
    let h = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    let mut px = vec![0.0; rows];
    let mut py = vec![0.0; cols];
    let mut hxy = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let p = joint[r * cols + c];
            px[r] += p;
            py[c] += p;
            hxy += h(p);
        }
    }
    let hx: f64 = px.iter().map(|&p| h(p)).sum();
    let hy: f64 = py.iter().map(|&p| h(p)).sum();
    Ok(hx + hy - hxy)
}
