//! Regenerates the committed C header from the FFI surface on every build.

use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());
    let header = crate_dir.join("include").join("adaqn.h");
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    match cbindgen::generate(&crate_dir) {
        Ok(bindings) => {
            bindings.write_to_file(&header);
        }
        // Keep building with the committed header if generation fails
        // (e.g. during publish verification in stripped environments).
        Err(e) => println!("cargo:warning=cbindgen failed, keeping committed header: {e}"),
    }
}
