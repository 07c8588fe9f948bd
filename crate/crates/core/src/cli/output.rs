use std::io::Write;

use serde::Serialize;

use crate::error::Result;

pub fn json<W: Write + ?Sized, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn matrix<W: Write + ?Sized>(out: &mut W, title: &str, rows: &[Vec<f64>]) -> Result<()> {
    writeln!(out, "{title}:")?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.6}")).collect();
        writeln!(out, "  {}", cells.join(" "))?;
    }
    Ok(())
}

pub fn vector<W: Write + ?Sized>(out: &mut W, title: &str, v: &[f64]) -> Result<()> {
    let cells: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    writeln!(out, "{title}: [{}]", cells.join(", "))?;
    Ok(())
}

/// Long-format CSV of named matrices: matrix,row,col,value (1-based indices).
pub fn matrices_csv<W: Write + ?Sized>(out: &mut W, mats: &[(&str, &[Vec<f64>])]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["matrix", "row", "col", "value"])?;
    for (name, rows) in mats {
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                wr.write_record([name.to_string(), (i + 1).to_string(), (j + 1).to_string(), v.to_string()])?;
            }
        }
    }
    wr.flush()?;
    Ok(())
}
