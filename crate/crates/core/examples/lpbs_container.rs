//! Writing and reading LPBS containers: header layout, metadata and exact
//! round trips.
//!
//! cargo run --release --example lpbs_container

use lpscatter::io::lpbs::{decode, encode, load_cylinder, load_scalar, save_cylinder, save_scalar, scalar_metadata};
use lpscatter::io::ExperimentConfig;
use lpscatter::radon::radon_normalized;

fn main() -> lpscatter::Result<()> {
    let cfg = ExperimentConfig::reduced();
    let v = cfg.phantom()?.field;
    let dir = std::env::temp_dir().join("lpbs_container_example");
    std::fs::create_dir_all(&dir)?;

    let bytes = encode(&scalar_metadata(&v), &v.values)?;
    let meta_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    println!("magic {:?}, version {}, metadata {meta_len} bytes, payload {} bytes",
        std::str::from_utf8(&bytes[..4]).unwrap_or("?"),
        u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")),
        bytes.len() - 12 - meta_len);
    println!("metadata: {}", std::str::from_utf8(&bytes[12..12 + meta_len]).unwrap_or("?"));
    assert_eq!(decode(&bytes)?.1, v.values);

    let path = dir.join("potential.lpbs");
    save_scalar(&v, &path, None)?;
    println!("scalar round trip exact: {}", load_scalar(&path)? == v);

    let g = radon_normalized(&v, &cfg.s_grid()?, &cfg.sphere()?)?;
    let path = dir.join("radon.lpbs");
    save_cylinder(&g, &path, None)?;
    let (back, meta) = load_cylinder(&path)?;
    println!("cylinder {:?} round trip exact: {}", meta.shape, back.values == g.values && back.s_grid == g.s_grid);
    Ok(())
}
