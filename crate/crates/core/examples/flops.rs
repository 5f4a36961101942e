//! Forward FLOPs of a few layers with and without the Sign-In factors.

use signlab::sparse::{flop_count, FlopMode, LayerDescr};

fn main() -> signlab::Result<()> {
    let layers = [
        LayerDescr::Conv { h_out: 1, w_out: 1, c_out: 1, k: 1, c_in: 1 },
        LayerDescr::Conv { h_out: 32, w_out: 32, c_out: 64, k: 3, c_in: 3 },
        LayerDescr::Conv { h_out: 8, w_out: 8, c_out: 256, k: 3, c_in: 128 },
        LayerDescr::Linear { m: 512, n: 10 },
    ];
    for l in layers {
        let plain = flop_count(l, FlopMode::Plain)?;
        let train = flop_count(l, FlopMode::SignInTraining)?;
        println!("{l:?}\n  plain {plain}  sign-in training {train} (+{:.3}%)", 100.0 * (train - plain) as f64 / plain as f64);
    }
    Ok(())
}
