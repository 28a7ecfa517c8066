use super::NumericsError;

/// Monotone alignment from `(0, 0)` to `(n - 1, m - 1)` with unit steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarpPath(pub Vec<(usize, usize)>);

impl WarpPath {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Classic symmetric DTW with `|a_i - b_j|` local cost.
pub fn dtw_align(a: &[f64], b: &[f64]) -> Result<(WarpPath, f64), NumericsError> {
    dtw_align_by(a, b, |x, y| (x - y).abs())
}

pub fn dtw_align_by<T, F>(a: &[T], b: &[T], cost: F) -> Result<(WarpPath, f64), NumericsError>
where
    F: Fn(&T, &T) -> f64,
{
    if a.is_empty() || b.is_empty() {
        return Err(NumericsError::EmptySequence);
    }
    let (n, m) = (a.len(), b.len());
    // acc[i][j]: cheapest path ending at (i, j)
    let mut acc = vec![vec![f64::INFINITY; m]; n];
    for i in 0..n {
        for j in 0..m {
            let c = cost(&a[i], &b[j]);
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { acc[i - 1][j - 1] } else { f64::INFINITY };
                let up = if i > 0 { acc[i - 1][j] } else { f64::INFINITY };
                let left = if j > 0 { acc[i][j - 1] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[i][j] = c + prev;
        }
    }

    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            // diagonal first on ties
            let diag = acc[i - 1][j - 1];
            let up = acc[i - 1][j];
            let left = acc[i][j - 1];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        path.push((i, j));
    }
    path.reverse();
    Ok((WarpPath(path), acc[n - 1][m - 1]))
}
