//! Writes the bundled instance corpus into `instances/` at the workspace root.

use std::path::PathBuf;

fn main() {
    let root: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "instances"].iter().collect();
    std::fs::create_dir_all(&root).unwrap();
    for (name, file) in quadhull::cli::corpus_instances() {
        let path = root.join(&name);
        let text = serde_json::to_string_pretty(&file).unwrap();
        std::fs::write(&path, text + "\n").unwrap();
        println!("wrote {}", path.display());
    }
}
