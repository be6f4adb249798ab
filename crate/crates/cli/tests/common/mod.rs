#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/corpus").canonicalize().unwrap()
}

pub fn migbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_migbench")).args(args).env("RUST_LOG", "info").output().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// The fixture config rewritten with absolute paths into `dir`, with `head`
/// prepended (top-level keys) and the KB root pointed at `kb_root`.
pub fn config_in(dir: &Path, head: &str, kb_root: &Path) -> PathBuf {
    let root = corpus();
    let text = std::fs::read_to_string(root.join("migbench.toml")).unwrap();
    let services = format!("source = \"{}/services/", root.display());
    let text = text
        .replace("kb_root = \"kbs\"", &format!("kb_root = \"{}\"", kb_root.display()))
        .replace("source = \"services/", &services);
    let path = dir.join("migbench.toml");
    std::fs::write(&path, format!("{head}\n{text}")).unwrap();
    path
}

/// Copy of the fixture KB directory with `keyword` dropped from `kb_id`.
pub fn kbs_without_keyword(dir: &Path, kb_id: &str, keyword: &str) -> PathBuf {
    let out = dir.join("kbs");
    std::fs::create_dir_all(&out).unwrap();
    for entry in std::fs::read_dir(corpus().join("kbs")).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap().to_str().unwrap().to_string();
        let mut text = std::fs::read_to_string(&p).unwrap();
        if name == format!("{kb_id}.kb.md") {
            let edited = text.replace(&format!("{keyword}, "), "");
            assert_ne!(edited, text, "keyword not found");
            text = edited;
        }
        std::fs::write(out.join(name), text).unwrap();
    }
    out
}
