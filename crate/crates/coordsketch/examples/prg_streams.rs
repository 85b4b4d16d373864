//! Small-seed PRG streams: random block access, seed material from a raw
//! little-endian byte blob, and PRG-backed exponential variates.
//!
//!     cargo run --release --example prg_streams

use coordsketch::randomness::{ExpStream, NisanPrg};

fn main() {
    let blocks = 1u64 << 16;
    // Seed material as it would be read from a seed file: raw LE bytes.
    let need = NisanPrg::required_seed_bytes(blocks);
    let material: Vec<u8> = (0..need).map(|i| (i as u64 * 167 + 13) as u8).collect();
    println!("{blocks} blocks need {need} bytes of seed material");

    let prg = NisanPrg::from_seed_material(&material, 48, blocks).expect("prg");
    println!("random access: block 0 = {:012x}", prg.block(0).unwrap());
    println!("              block 65535 = {:012x}", prg.block(65_535).unwrap());

    let mut ones = 0u64;
    let probe = 20_000u64;
    for i in 0..probe {
        ones += prg.block(i).unwrap().count_ones() as u64;
    }
    println!(
        "bit frequency over {probe} blocks: {:.5}",
        ones as f64 / (probe * 48) as f64
    );

    // Exponential variates driven by the same generator.
    let exps = ExpStream::nisan_from_material(&material, blocks, 48, 0.05).expect("stream");
    let n = blocks; // the stream rejects indexes past its declared length
    let mean = (0..n).map(|i| exps.variate(i)).sum::<f64>() / n as f64;
    println!("PRG-backed exponential mean over {n} draws: {mean:.4}");
}
