//! Node counts over a grid of initial values, written as CSV to stdout.

use boundstate_lab::io::write_sweep_csv;
use boundstate_lab::ladder::{linspace, sweep};
use boundstate_lab::{FieldParams, IntegratorControls};

pub fn main() {
    let field = FieldParams::new(3, 3.0).unwrap();
    let atlas = sweep(&field, &linspace(1.5, 20.0, 24), &IntegratorControls::default()).unwrap();
    write_sweep_csv(&atlas, std::io::stdout().lock()).unwrap();
    println!("monotone: {}, indeterminate rows: {}", atlas.monotone, atlas.indeterminate);
}
