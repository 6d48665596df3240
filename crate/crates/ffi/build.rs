use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());
    let header = crate_dir.join("include").join("scalelaws.h");
    std::fs::create_dir_all(header.parent().unwrap()).unwrap();

    cbindgen::generate(&crate_dir)
        .expect("unable to generate C header")
        .write_to_file(&header);

    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
