//! Plain-text dumps of the per-cycle hierarchies.

use std::fmt::Write as _;
use std::path::Path;

use lexdyn::hlsp::{Hierarchy, Relation};

/// One line per row: level, relation, `b`, then the row of `A`.
pub fn render(h: &Hierarchy<f64>) -> String {
    let mut s = format!("n {}\nlevels {}\n", h.n(), h.len());
    for (l, lv) in h.levels().iter().enumerate() {
        for r in 0..lv.rows() {
            let rel = match lv.relations[r] {
                Relation::Equal => "eq",
                Relation::Upper => "le",
                Relation::Lower => "ge",
            };
            let _ = write!(s, "{l} {rel} {:e}", lv.b[r]);
            for v in lv.a.row(r).iter() {
                let _ = write!(s, " {v:e}");
            }
            s.push('\n');
        }
    }
    s
}

pub fn write_cycle(dir: &Path, cycle: usize, h: &Hierarchy<f64>) -> std::io::Result<()> {
    std::fs::write(dir.join(format!("cycle_{cycle:06}.txt")), render(h))
}
