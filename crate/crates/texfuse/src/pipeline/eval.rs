//! Train/evaluate one split from cached feature rows; aggregate repeated
//! runs into mean +/- std summaries.

use super::cache::FeatureCache;
use super::manifest::DatasetManifest;
use super::split::Split;
use crate::classify::{
    cross_validate_c, fuse_features, predict, train_linear_svm_ovr, DEFAULT_C_GRID,
};
use crate::error::{Result, TexError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CReg {
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for CReg {
    type Err = TexError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(CReg::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|c| c.is_finite() && *c > 0.0)
            .map(CReg::Fixed)
            .ok_or_else(|| {
                TexError::InvalidArgument(format!("--c must be \"auto\" or a positive number, got {s:?}"))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    /// confusion[actual][predicted] test counts; row sums = per-class totals.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub mca: f64,
    /// The C actually used (after cross-validation if auto).
    pub c_used: f64,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// Fused feature row for one image path, drawn from every cache in order.
pub fn fused_row(caches: &[&FeatureCache], image_path: &str) -> Result<Vec<f64>> {
    let blocks: Vec<Vec<f64>> = caches
        .iter()
        .map(|c| {
            c.get(image_path)
                .ok_or_else(|| TexError::Cache(format!("no cached row for {image_path:?}")))
        })
        .collect::<Result<_>>()?;
    fuse_features(&blocks)
}

/// Train an OvR SVM on the split's training rows and score its test rows.
pub fn run_train_eval(
    manifest: &DatasetManifest,
    split: &Split,
    caches: &[&FeatureCache],
    c: CReg,
) -> Result<EvalReport> {
    if caches.is_empty() {
        return Err(TexError::InvalidArgument("no feature caches given".into()));
    }
    let mut train_x = Vec::new();
    let mut train_y = Vec::new();
    let mut train_groups = Vec::new();
    let mut test = Vec::new();
    for e in &manifest.entries {
        let path = e.image.to_string_lossy();
        if split.train_specimens.contains(&e.specimen) {
            train_x.push(fused_row(caches, &path)?);
            train_y.push(e.class.clone());
            train_groups.push(e.specimen.clone());
        } else if split.test_specimens.contains(&e.specimen) {
            test.push((fused_row(caches, &path)?, e.class.clone()));
        }
    }
    if train_x.is_empty() || test.is_empty() {
        return Err(TexError::Training(
            "split produced an empty train or test set".into(),
        ));
    }
    let c_used = match c {
        CReg::Fixed(v) => v,
        CReg::Auto => cross_validate_c(&train_x, &train_y, &train_groups, &DEFAULT_C_GRID)?,
    };
    let model = train_linear_svm_ovr(&train_x, &train_y, c_used)?;

    let classes = manifest.classes.clone();
    let class_index = |label: &str| -> Result<usize> {
        classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| TexError::Training(format!("unknown class {label:?}")))
    };
    let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
    let mut correct = 0usize;
    for (x, actual) in &test {
        let predicted = predict(&model, x)?;
        confusion[class_index(actual)?][class_index(&predicted)?] += 1;
        if &predicted == actual {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / test.len() as f64;
    // MCA: mean per-class recall over classes present in the test set.
    let recalls: Vec<f64> = confusion
        .iter()
        .enumerate()
        .filter(|(_, row)| row.iter().sum::<usize>() > 0)
        .map(|(i, row)| confusion[i][i] as f64 / row.iter().sum::<usize>() as f64)
        .collect();
    let mca = recalls.iter().sum::<f64>() / recalls.len() as f64;
    Ok(EvalReport {
        classes,
        confusion,
        accuracy,
        mca,
        c_used,
        train_rows: train_x.len(),
        test_rows: test.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub classes: Vec<String>,
    pub repeats: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_mca: f64,
    pub std_mca: f64,
    /// Element-wise sum of per-split confusion counts.
    pub confusion_sum: Vec<Vec<usize>>,
    /// Row-normalized percentages of `confusion_sum` (rows sum to 100).
    pub confusion_percent: Vec<Vec<f64>>,
    pub per_split_accuracy: Vec<f64>,
    pub per_split_mca: Vec<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean +/- sample standard deviation across repeats, plus summed and
/// row-normalized confusion matrices.
pub fn aggregate_reports(reports: &[EvalReport]) -> Result<Summary> {
    let first = reports
        .first()
        .ok_or_else(|| TexError::InvalidArgument("no reports to aggregate".into()))?;
    if reports.iter().any(|r| r.classes != first.classes) {
        return Err(TexError::InvalidArgument(
            "reports have mismatched class sets".into(),
        ));
    }
    let k = first.classes.len();
    let mut confusion_sum = vec![vec![0usize; k]; k];
    for r in reports {
        for i in 0..k {
            for j in 0..k {
                confusion_sum[i][j] += r.confusion[i][j];
            }
        }
    }
    let confusion_percent = confusion_sum
        .iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            row.iter()
                .map(|&v| {
                    if total == 0 {
                        0.0
                    } else {
                        100.0 * v as f64 / total as f64
                    }
                })
                .collect()
        })
        .collect();
    let accs: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let mcas: Vec<f64> = reports.iter().map(|r| r.mca).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&accs);
    let (mean_mca, std_mca) = mean_std(&mcas);
    Ok(Summary {
        classes: first.classes.clone(),
        repeats: reports.len(),
        mean_accuracy,
        std_accuracy,
        mean_mca,
        std_mca,
        confusion_sum,
        confusion_percent,
        per_split_accuracy: accs,
        per_split_mca: mcas,
    })
}

impl Summary {
    /// Human-readable table.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "repeats: {}\naccuracy: {:.4} +/- {:.4}\nmca:      {:.4} +/- {:.4}\n",
            self.repeats, self.mean_accuracy, self.std_accuracy, self.mean_mca, self.std_mca
        ));
        out.push_str("confusion (row = actual, % of row):\n");
        let width = self
            .classes
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(6);
        out.push_str(&format!("{:>width$} ", ""));
        for c in &self.classes {
            out.push_str(&format!("{c:>width$} "));
        }
        out.push('\n');
        for (c, row) in self.classes.iter().zip(&self.confusion_percent) {
            out.push_str(&format!("{c:>width$} "));
            for v in row {
                out.push_str(&format!("{v:>width$.1} "));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn report(classes: &[&str], confusion: Vec<Vec<usize>>, acc: f64, mca: f64) -> EvalReport {
        EvalReport {
            classes: classes.iter().map(|s| s.to_string()).collect(),
            confusion,
            accuracy: acc,
            mca,
            c_used: 1.0,
            train_rows: 0,
            test_rows: 0,
        }
    }

    #[test]
    fn creg_parsing() {
        assert_eq!("auto".parse::<CReg>().unwrap(), CReg::Auto);
        assert_eq!("0.5".parse::<CReg>().unwrap(), CReg::Fixed(0.5));
        assert!("-1".parse::<CReg>().is_err());
        assert!("abc".parse::<CReg>().is_err());
    }

    #[test]
    fn aggregate_single_report() {
        let r = report(&["a", "b"], vec![vec![3, 0], vec![1, 2]], 5.0 / 6.0, 0.83);
        let s = aggregate_reports(&[r.clone()]).unwrap();
        assert_abs_diff_eq!(s.mean_accuracy, r.accuracy, epsilon = 1e-12);
        assert_eq!(s.std_accuracy, 0.0);
        assert_eq!(s.confusion_sum, r.confusion);
    }

    #[test]
    fn aggregate_mean_and_std() {
        let a = report(&["a"], vec![vec![7]], 0.70, 0.70);
        let b = report(&["a"], vec![vec![8]], 0.80, 0.80);
        let s = aggregate_reports(&[a, b]).unwrap();
        assert_abs_diff_eq!(s.mean_accuracy, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(s.std_accuracy, 0.07071067811865475, epsilon = 1e-10);
    }

    #[test]
    fn confusion_percent_rows_sum_to_100() {
        let r = report(&["a", "b"], vec![vec![3, 1], vec![2, 6]], 0.75, 0.75);
        let s = aggregate_reports(&[r]).unwrap();
        for row in &s.confusion_percent {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 100.0, epsilon = 1e-9);
        }
        assert!(!s.render_text().is_empty());
    }

    #[test]
    fn aggregate_rejects_mismatched_classes() {
        let a = report(&["a"], vec![vec![1]], 1.0, 1.0);
        let b = report(&["b"], vec![vec![1]], 1.0, 1.0);
        assert!(aggregate_reports(&[a, b]).is_err());
        assert!(aggregate_reports(&[]).is_err());
    }
}
