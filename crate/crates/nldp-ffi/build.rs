fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let header = std::path::Path::new(&crate_dir).join("include/nldp.h");
    match cbindgen::generate(&crate_dir) {
        // write_to_file leaves the file untouched when the content is
        // unchanged, so this does not churn rebuilds.
        Ok(bindings) => {
            bindings.write_to_file(&header);
        }
        // A stale header is caught by the ABI test, which asserts the
        // declarations; don't fail the whole build over generation.
        Err(err) => println!("cargo:warning=header generation failed: {err}"),
    }
}
