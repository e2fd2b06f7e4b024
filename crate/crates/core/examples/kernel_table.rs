//! Drives the `kernel` subcommand in-process and prints the first rows.

use hodse::cli::{cmd_kernel, KernelArgs};

fn main() -> hodse::Result<()> {
    let args = KernelArgs {
        profile: "default".into(),
        bandwidth: 0.5,
        p: Some(0.5),
        grid: "-2:2:9".into(),
        orders: vec![1, 2],
        out: None,
        help: None,
    };
    let table = cmd_kernel(&args)?;
    print!("{}", table.csv);
    Ok(())
}
