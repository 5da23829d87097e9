fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        cpp_compat: true,
        include_guard: Some("UNMIX_H".to_owned()),
        documentation: true,
        enumeration: cbindgen::EnumConfig {
            // UnmixStatus::Ok -> UNMIX_STATUS_OK, keeping C namespaces clean.
            rename_variants: cbindgen::RenameRule::QualifiedScreamingSnakeCase,
            ..Default::default()
        },
        ..Default::default()
    };
    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("failed to generate C header")
        .write_to_file(std::path::Path::new(&crate_dir).join("include/unmix.h"));
    println!("cargo:rerun-if-changed=src/lib.rs");
}
