use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::LcmsError;

/// An 8-connected region of positive signal. Times are scan indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub row_start: usize,
    pub row_end: usize,
    pub apex_row: usize,
    /// m/z of the apex row.
    pub mz: f64,
    /// m/z of `row_start` and `row_end`.
    pub mz_low: f64,
    pub mz_high: f64,
    pub t_start: usize,
    pub t_end: usize,
    pub apex_t: usize,
    /// Sum of the signal over the region.
    pub area: f64,
    pub max: f64,
    pub cells: usize,
}

/// Connected components of `s > 0`, ordered by apex time then apex row.
pub fn extract_peaks(s: &[f64], rows: usize, cols: usize, mz: &[f64]) -> Result<Vec<Peak>, LcmsError> {
    if s.len() != rows * cols {
        return Err(LcmsError::ValueCount { expected: rows * cols, actual: s.len() });
    }
    if mz.len() != rows {
        return Err(LcmsError::AxisLength { expected: rows, actual: mz.len() });
    }
    let mut visited = alloc::vec![false; s.len()];
    let mut stack = Vec::new();
    let mut peaks = Vec::new();
    for start in 0..s.len() {
        if visited[start] || !(s[start] > 0.0) {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let (r0, c0) = (start / cols, start % cols);
        let mut p = Peak {
            row_start: r0,
            row_end: r0,
            apex_row: r0,
            mz: 0.0,
            mz_low: 0.0,
            mz_high: 0.0,
            t_start: c0,
            t_end: c0,
            apex_t: c0,
            area: 0.0,
            max: f64::NEG_INFINITY,
            cells: 0,
        };
        while let Some(i) = stack.pop() {
            let (r, c) = (i / cols, i % cols);
            let v = s[i];
            p.row_start = p.row_start.min(r);
            p.row_end = p.row_end.max(r);
            p.t_start = p.t_start.min(c);
            p.t_end = p.t_end.max(c);
            p.area += v;
            p.cells += 1;
            if v > p.max || (v == p.max && (c, r) < (p.apex_t, p.apex_row)) {
                p.max = v;
                p.apex_row = r;
                p.apex_t = c;
            }
            for nr in r.saturating_sub(1)..=(r + 1).min(rows - 1) {
                for nc in c.saturating_sub(1)..=(c + 1).min(cols - 1) {
                    let j = nr * cols + nc;
                    if !visited[j] && s[j] > 0.0 {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        p.mz = mz[p.apex_row];
        p.mz_low = mz[p.row_start];
        p.mz_high = mz[p.row_end];
        peaks.push(p);
    }
    peaks.sort_by_key(|p| (p.apex_t, p.apex_row));
    Ok(peaks)
}

/// Drops every peak that matches a blank peak: their m/z extents overlap once
/// widened by `m_tol`, and their apex scans differ by at most `t_tol`.
/// Order is preserved.
pub fn subtract_blank(peaks: &[Peak], blank: &[Peak], m_tol: f64, t_tol: usize) -> Result<Vec<Peak>, LcmsError> {
    if !(m_tol >= 0.0) {
        return Err(LcmsError::InvalidParameter("m/z tolerance must be ≥ 0".into()));
    }
    Ok(peaks
        .iter()
        .filter(|p| {
            !blank.iter().any(|b| {
                p.mz_low - m_tol <= b.mz_high && b.mz_low - m_tol <= p.mz_high && p.apex_t.abs_diff(b.apex_t) <= t_tol
            })
        })
        .cloned()
        .collect())
}
