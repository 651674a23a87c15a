use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use spmvlab::matrix::{Csr5Matrix, CsrMatrix};

pub fn open(out: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn list<T: Display>(items: &[T]) -> String {
    let parts: Vec<String> = items.iter().map(ToString::to_string).collect();
    format!("[{}]", parts.join(", "))
}

/// Like [`list`], with `|` between tiles of `chunk` elements.
fn tiled<T: Display>(items: &[T], chunk: usize) -> String {
    let tiles: Vec<String> = items
        .chunks(chunk.max(1))
        .map(|c| {
            c.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        })
        .collect();
    format!("[{}]", tiles.join(" | "))
}

pub fn render_csr(m: &CsrMatrix) -> String {
    format!(
        "rows={} cols={} nnz={}\nptr={}\nindices={}\ndata={}\n",
        m.n_rows(),
        m.n_cols(),
        m.nnz(),
        list(m.row_ptr()),
        list(m.col_idx()),
        list(m.values())
    )
}

pub fn render_csr5(m: &Csr5Matrix) -> String {
    let len = m.tile_len();
    let flags: Vec<&str> = m
        .bit_flag()
        .iter()
        .map(|&b| if b { "T" } else { "F" })
        .collect();
    let mut s = format!(
        "rows={} cols={} nnz={} omega={} sigma={} tiles={}\n",
        m.n_rows(),
        m.n_cols(),
        m.nnz(),
        m.omega(),
        m.sigma(),
        m.n_tiles()
    );
    s += &format!("ptr={}\n", list(m.row_ptr()));
    s += &format!("tile_ptr={}\n", list(m.tile_ptr()));
    s += &format!("bit_flag={}\n", tiled(&flags, len));
    s += &format!("y_off={}\n", tiled(m.y_off(), m.omega()));
    s += &format!("seg_off={}\n", tiled(m.seg_off(), m.omega()));
    s += &format!("indices={}\n", tiled(m.col_idx(), len));
    s += &format!("data={}\n", tiled(m.values(), len));
    if m.tail_len() > 0 {
        s += &format!("tail_rows={}\n", list(m.tail_row()));
        s += &format!("tail_indices={}\n", list(m.tail_col()));
        s += &format!("tail_data={}\n", list(m.tail_val()));
    }
    s
}
