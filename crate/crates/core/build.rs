use std::process::Command;

fn main() {
    let describe = Command::new("git")
        .args(["describe", "--always", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_default();
    let version = std::env::var("CARGO_PKG_VERSION").unwrap_or_default();
    let full = if describe.is_empty() { version } else { format!("{version} ({describe})") };
    println!("cargo:rustc-env=DYADIC_SPECTRA_VERSION={full}");
    println!("cargo:rerun-if-changed=build.rs");
}
