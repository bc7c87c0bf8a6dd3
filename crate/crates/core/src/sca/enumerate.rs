//! Brute force over all binary mode vectors, for small `M`.

use super::polish::fixed_mode_result;
use super::{PenaltyConfig, RunResult};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::scenario::Scenario;

/// Above this the `2^M` sweep is refused.
pub const MAX_ENUMERATION_APS: usize = 16;

#[derive(Debug, Clone)]
pub struct EnumerationEntry {
    pub dl_flags: Vec<bool>,
    pub result: RunResult,
}

#[derive(Debug, Clone)]
pub struct Enumeration {
    pub entries: Vec<EnumerationEntry>,
    /// Index into `entries` of the best converged sum SE.
    pub best: Option<usize>,
}

impl Enumeration {
    pub fn best_entry(&self) -> Option<&EnumerationEntry> {
        self.best.map(|i| &self.entries[i])
    }
}

/// AP `m` is DL in vector `code` iff bit `m` is set.
pub fn flags_from_code(code: usize, num_aps: usize) -> Vec<bool> {
    (0..num_aps).map(|m| code >> m & 1 == 1).collect()
}

/// Power-only optimization for every one of the `2^M` mode vectors.
pub fn enumerate_modes(sc: &Scenario, pen: &PenaltyConfig, exec: Execution) -> Result<Enumeration> {
    let m = sc.num_aps();
    if m > MAX_ENUMERATION_APS {
        return Err(Error::InvalidConfig(format!(
            "enumeration over 2^{m} mode vectors refused (limit {MAX_ENUMERATION_APS} APs)"
        )));
    }
    let results = map_indexed(exec, 1 << m, |code| {
        let flags = flags_from_code(code, m);
        fixed_mode_result(sc, &flags, None, pen).map(|result| EnumerationEntry { dl_flags: flags, result })
    });
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;
    let best = entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.result.converged())
        .max_by(|a, b| a.1.result.se.sum.total_cmp(&b.1.result.se.sum))
        .map(|(i, _)| i);
    Ok(Enumeration { entries, best })
}
