//! Verbosity control through the BENDML_LOG environment variable:
//! `quiet`, `info` (default), or `debug`.

use std::sync::OnceLock;

#[derive(PartialEq, PartialOrd, Clone, Copy)]
enum Level {
    Quiet,
    Info,
    Debug,
}

fn level() -> Level {
    static LEVEL: OnceLock<Level> = OnceLock::new();
    *LEVEL.get_or_init(|| match std::env::var("BENDML_LOG").as_deref() {
        Ok("quiet") | Ok("QUIET") => Level::Quiet,
        Ok("debug") | Ok("DEBUG") => Level::Debug,
        _ => Level::Info,
    })
}

pub fn log_info(msg: &str) {
    if level() >= Level::Info {
        eprintln!("[bendml] {msg}");
    }
}

pub fn log_debug(msg: &str) {
    if level() >= Level::Debug {
        eprintln!("[bendml:debug] {msg}");
    }
}
