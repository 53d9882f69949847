//! Per-level breakdown of single-source runs across thread counts.

use std::fmt::Write;
use std::time::Duration;

use ife_core::LevelStat;

/// The levels of one run, labelled by its thread count.
#[derive(Clone, Copy, Debug)]
pub struct LevelColumn<'a> {
    pub threads: usize,
    pub levels: &'a [LevelStat],
}

/// Renders one row per level (frontier size, then ms per thread count) and a
/// total row. Frontier sizes come from the first column that has the level.
pub fn emit_level_table(columns: &[LevelColumn<'_>]) -> String {
    let depth = columns.iter().map(|c| c.levels.len()).max().unwrap_or(0);
    let mut out = String::new();
    let _ = write!(out, "{:>5} {:>12}", "level", "frontier");
    for c in columns {
        let _ = write!(out, " {:>10}", format!("{}T ms", c.threads));
    }
    out.push('\n');

    let mut total_frontier = 0usize;
    for i in 0..depth {
        let stat = columns.iter().find_map(|c| c.levels.get(i));
        let (level, frontier) = stat.map_or((i as u32 + 1, 0), |s| (s.level, s.frontier_size));
        total_frontier += frontier;
        let _ = write!(out, "{level:>5} {frontier:>12}");
        for c in columns {
            match c.levels.get(i) {
                Some(s) => {
                    let _ = write!(out, " {:>10}", ms(s.elapsed));
                }
                None => {
                    let _ = write!(out, " {:>10}", "-");
                }
            }
        }
        out.push('\n');
    }

    let _ = write!(out, "{:>5} {total_frontier:>12}", "total");
    for c in columns {
        let total: Duration = c.levels.iter().map(|s| s.elapsed).sum();
        let _ = write!(out, " {:>10}", ms(total));
    }
    out.push('\n');
    out
}

fn ms(d: Duration) -> String {
    format!("{:.2}", d.as_secs_f64() * 1e3)
}
