//! Regenerates include/linfric.h from the exported items in src/lib.rs.
//! The header is committed so downstream builds can consume it without
//! running this crate's build script.

use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").unwrap());
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let config = cbindgen::Config::from_file(crate_dir.join("cbindgen.toml"))
        .expect("cbindgen.toml must parse");
    match cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
    {
        Ok(bindings) => {
            bindings.write_to_file(crate_dir.join("include/linfric.h"));
        }
        // Keep the committed header usable even when header generation
        // cannot run (e.g. offline docs builds); fail loudly otherwise.
        Err(cbindgen::Error::ParseSyntaxError { .. }) => {}
        Err(e) => panic!("cannot generate include/linfric.h: {e}"),
    }
}
