//! Regenerates `include/boo.h` from the annotated sources. The header is
//! committed so C consumers can build without cbindgen; generation failures
//! therefore warn instead of failing the build.

use std::env;
use std::fs;
use std::path::Path;

fn main() {
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let crate_dir = env::var("CARGO_MANIFEST_DIR").expect("cargo sets CARGO_MANIFEST_DIR");
    let header = Path::new(&crate_dir).join("include/boo.h");

    let config = cbindgen::Config::from_root_or_default(&crate_dir);
    match cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
    {
        Ok(bindings) => {
            let mut rendered = Vec::new();
            bindings.write(&mut rendered);
            // Rewrite only on change so the committed header does not cause
            // rebuild churn.
            if fs::read(&header).ok().as_deref() != Some(rendered.as_slice()) {
                fs::create_dir_all(header.parent().expect("header path has a parent"))
                    .expect("create include directory");
                fs::write(&header, rendered).expect("write generated header");
            }
        }
        Err(e) => println!("cargo:warning=cbindgen failed, keeping committed header: {e}"),
    }
}
