//! Log-log plot data with reference slope lines.
//!
//! Output is whitespace-separated columns for gnuplot and similar tools:
//! `n_triangles`, then for every available series its values and a guide
//! line `y_last * (N / N_last)^slope` through the series' last point.

use std::fmt::Write as _;

use crate::csvio::{num, Table};

pub const SERIES: [&str; 7] = ["err_u_h1", "err_psi_l2", "err_m_l2", "eta1", "eta2", "eta3", "eta"];

pub fn plot_data(table: &Table, slope: f64) -> Result<String, String> {
    let n = table.column("n_triangles").ok_or("missing n_triangles column")?;
    let mut cols: Vec<(&str, Vec<f64>)> = Vec::new();
    for name in SERIES {
        if let Some(v) = table.column(name) {
            if v.iter().any(|x| x.is_finite() && *x > 0.0) {
                cols.push((name, v));
            }
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "# log-log data; guide lines have slope {}", num(slope));
    let mut head = vec!["n_triangles".to_string()];
    for (name, _) in &cols {
        head.push(name.to_string());
        head.push(format!("guide_{name}"));
    }
    let _ = writeln!(out, "# {}", head.join(" "));
    let anchors: Vec<Option<(f64, f64)>> = cols
        .iter()
        .map(|(_, v)| (0..v.len()).rev().find(|&i| v[i].is_finite() && v[i] > 0.0 && n[i] > 0.0).map(|i| (n[i], v[i])))
        .collect();
    for (i, &ni) in n.iter().enumerate() {
        let mut line = vec![num(ni)];
        for ((_, v), anchor) in cols.iter().zip(&anchors) {
            line.push(num(v[i]));
            let g = anchor.map_or(f64::NAN, |(n0, y0)| y0 * (ni / n0).powf(slope));
            line.push(num(g));
        }
        let _ = writeln!(out, "{}", line.join(" "));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csvio::parse_table;

    const CSV: &str = "level,n_triangles,err_u_h1,eta\n0,32,1.0e-1,NaN\n1,128,5.0e-2,NaN\n";

    #[test]
    fn guide_through_last_point() {
        let t = parse_table(CSV).unwrap();
        let s = plot_data(&t, -0.5).unwrap();
        let rows: Vec<Vec<f64>> = s.lines().filter(|l| !l.starts_with('#')).map(|l| l.split(' ').map(|x| x.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].len(), 3, "eta column is all NaN and dropped");
        assert_eq!(rows[1][2], rows[1][1]);
        let slope = (rows[1][2] / rows[0][2]).ln() / (rows[1][0] / rows[0][0]).ln();
        assert!((slope + 0.5).abs() < 1e-14);
        assert_eq!(plot_data(&t, -0.5).unwrap(), s);
    }
}
