// Validate the study manifests shipped in `manifests/`.

use studyflow::model::{validate_study, StudyDescription};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("manifests");
    let mut paths: Vec<_> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    paths.sort();
    for path in paths {
        let study = StudyDescription::from_toml(&std::fs::read_to_string(&path)?)?.assemble()?;
        let diagnostics = validate_study(&study);
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        if diagnostics.is_empty() {
            println!("{name}: ok");
        }
        for d in diagnostics {
            println!("{name}: {d}");
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
