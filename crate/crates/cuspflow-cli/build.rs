use std::process::Command;

fn git(args: &[&str]) -> Option<String> {
    let out = Command::new("git").args(args).output().ok()?;
    if !out.status.success() {
        return None;
    }
    let s = String::from_utf8(out.stdout).ok()?.trim().to_string();
    (!s.is_empty()).then_some(s)
}

fn main() {
    let pkg = std::env::var("CARGO_PKG_VERSION").unwrap_or_default();
    let version = git(&["describe", "--tags", "--dirty", "--long"]).unwrap_or_else(|| {
        match git(&["describe", "--always", "--dirty"]) {
            Some(hash) => format!("v{pkg}-0-g{hash}"),
            None => format!("v{pkg}-unknown"),
        }
    });
    println!("cargo:rustc-env=CUSPFLOW_VERSION={version}");
    println!("cargo:rerun-if-changed=../../.git/HEAD");
    println!("cargo:rerun-if-changed=../../.git/index");
}
