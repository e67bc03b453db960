use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use scanqa::dataset::{AnswerSubmission, Confidence, QaRecord, Split};
use scanqa::scene::{export_ply, InstanceAnnotation, Point, Scene};
use scanqa_ffi::*;

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("scanqa.h")
}

fn last_error() -> String {
    let mut buf = [0 as c_char; 512];
    let st = unsafe { scanqa_last_error_message(buf.as_mut_ptr(), buf.len(), ptr::null_mut()) };
    assert_eq!(st, ScanqaStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn red_chair_scene(dir: &Path) -> PathBuf {
    let mut points = Vec::new();
    for i in 0..8 {
        let f = |b: usize| if i >> b & 1 == 1 { 1.0 } else { 0.0 };
        points.push(Point::new(f(0), f(1), f(2), [255, 0, 0]));
    }
    let inst = InstanceAnnotation { instance_id: 1, class_name: "chair".into(), point_indices: (0..8).collect() };
    let scene = Scene::new("room", points, Some(vec![inst])).unwrap();
    let path = dir.join("room.ply");
    export_ply(&scene, &path).unwrap();
    path
}

#[test]
fn scene_handles_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(red_chair_scene(dir.path()).to_str().unwrap()).unwrap();
    let mut scene: *mut ScanqaScene = ptr::null_mut();
    assert_eq!(unsafe { scanqa_scene_load_ply(path.as_ptr(), &mut scene) }, ScanqaStatus::Ok);
    assert_eq!(unsafe { scanqa_scene_num_points(scene) }, 8);

    let mut needed = 0;
    let mut small = [0 as c_char; 2];
    let st = unsafe { scanqa_scene_id(scene, small.as_mut_ptr(), small.len(), &mut needed) };
    assert_eq!(st, ScanqaStatus::ErrBufferTooSmall);
    assert_eq!(needed, 5);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(unsafe { scanqa_scene_id(scene, buf.as_mut_ptr(), buf.len(), &mut needed) }, ScanqaStatus::Ok);
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), "room");

    let copy = CString::new(dir.path().join("copy.ply").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { scanqa_scene_export_ply(scene, copy.as_ptr()) }, ScanqaStatus::Ok);
    let mut again: *mut ScanqaScene = ptr::null_mut();
    assert_eq!(unsafe { scanqa_scene_load_ply(copy.as_ptr(), &mut again) }, ScanqaStatus::Ok);
    assert_eq!(unsafe { scanqa_scene_num_points(again) }, 8);
    unsafe {
        scanqa_scene_free(scene);
        scanqa_scene_free(again);
        scanqa_scene_free(ptr::null_mut());
    }
}

#[test]
fn errors_map_to_codes_and_messages() {
    let missing = CString::new("/nonexistent/scene.ply").unwrap();
    let mut scene: *mut ScanqaScene = ptr::null_mut();
    assert_eq!(unsafe { scanqa_scene_load_ply(missing.as_ptr(), &mut scene) }, ScanqaStatus::ErrIo);
    assert!(scene.is_null());
    assert!(last_error().contains("/nonexistent/scene.ply"));

    assert_eq!(unsafe { scanqa_scene_load_ply(ptr::null(), &mut scene) }, ScanqaStatus::ErrNullArgument);
    assert!(last_error().contains("path"));

    let bad = [0xffu8, 0];
    let st = unsafe { scanqa_scene_load_ply(bad.as_ptr().cast(), &mut scene) };
    assert_eq!(st, ScanqaStatus::ErrInvalidUtf8);

    let mut out = 0.0;
    let answer = CString::new("red").unwrap();
    let junk = CString::new("{not json").unwrap();
    assert_eq!(unsafe { scanqa_accuracy(answer.as_ptr(), junk.as_ptr(), &mut out) }, ScanqaStatus::ErrParse);

    let mut model: *mut ScanqaModel = ptr::null_mut();
    let nodir = CString::new("/nonexistent/ckpt").unwrap();
    assert_eq!(unsafe { scanqa_model_load(nodir.as_ptr(), &mut model) }, ScanqaStatus::ErrIo);
    assert!(model.is_null());
}

#[test]
fn success_clears_the_last_error() {
    let mut scene: *mut ScanqaScene = ptr::null_mut();
    unsafe { scanqa_scene_load_ply(ptr::null(), &mut scene) };
    assert!(!last_error().is_empty());
    let mut buf = [0 as c_char; 16];
    assert_eq!(unsafe { scanqa_nearest_color(250, 5, 5, buf.as_mut_ptr(), 16, ptr::null_mut()) }, ScanqaStatus::Ok);
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), "red");
    assert_eq!(last_error(), "");
}

#[test]
fn accuracy_through_the_abi() {
    let record = QaRecord {
        question_id: "q".into(),
        scene_id: "s".into(),
        question: "what color is the chair".into(),
        answers: ["red", "red", "blue"]
            .iter()
            .enumerate()
            .map(|(i, a)| AnswerSubmission::new(a, Confidence::Yes, format!("a{i}")).unwrap())
            .collect(),
        split: Split::Train,
    };
    let json = CString::new(serde_json::to_string(&record).unwrap()).unwrap();
    for (answer, want) in [("red", 1.0), ("blue", 0.5), ("green", 0.0)] {
        let a = CString::new(answer).unwrap();
        let mut out = -1.0;
        assert_eq!(unsafe { scanqa_accuracy(a.as_ptr(), json.as_ptr(), &mut out) }, ScanqaStatus::Ok);
        assert_eq!(out, want, "{answer}");
    }
}

#[test]
fn question_check_through_the_abi() {
    let cases = [
        ("Is there a cabinet?", ScanqaRejection::Existence),
        ("How many chairs are there?", ScanqaRejection::Count),
        ("Where is the lamp placed next to the bed?", ScanqaRejection::Accepted),
    ];
    for (q, want) in cases {
        let c = CString::new(q).unwrap();
        let mut out = ScanqaRejection::Accepted;
        assert_eq!(unsafe { scanqa_check_question(c.as_ptr(), &mut out) }, ScanqaStatus::Ok);
        assert_eq!(out, want, "{q}");
    }
}

#[test]
fn positional_encoding_through_the_abi() {
    let v: [f64; 12] = std::array::from_fn(|i| i as f64 / 12.0);
    let mut out = vec![0.0; 12 * 4];
    assert_eq!(unsafe { scanqa_positional_encode(v.as_ptr(), 4, out.as_mut_ptr(), out.len()) }, ScanqaStatus::Ok);
    // Component 1, first sine/cosine pair: frequency 1.
    assert!((out[4] - (1.0f64 / 12.0).sin()).abs() < 1e-12);
    assert!((out[5] - (1.0f64 / 12.0).cos()).abs() < 1e-12);
    let st = unsafe { scanqa_positional_encode(v.as_ptr(), 4, out.as_mut_ptr(), 47) };
    assert_eq!(st, ScanqaStatus::ErrBufferTooSmall);
    let st = unsafe { scanqa_positional_encode(v.as_ptr(), 3, out.as_mut_ptr(), out.len()) };
    assert_eq!(st, ScanqaStatus::ErrParameter);
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(scanqa_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "scanqa_last_error_message",
        "scanqa_version",
        "scanqa_scene_load_ply",
        "scanqa_scene_export_ply",
        "scanqa_scene_num_points",
        "scanqa_scene_id",
        "scanqa_scene_free",
        "scanqa_model_load",
        "scanqa_model_num_answers",
        "scanqa_model_answer",
        "scanqa_model_free",
        "scanqa_accuracy",
        "scanqa_check_question",
        "scanqa_nearest_color",
        "scanqa_positional_encode",
        "SCANQA_STATUS_OK = 0",
        "typedef struct ScanqaScene ScanqaScene;",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let inc = header().parent().unwrap().to_path_buf();
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
            .arg(&inc)
            .arg("-")
            .stdin(std::process::Stdio::piped())
            .spawn()
            .and_then(|mut child| {
                use std::io::Write;
                child.stdin.take().unwrap().write_all(b"#include \"scanqa.h\"\nint main(void) { return 0; }\n")?;
                child.wait()
            })
            .unwrap_or_else(|e| panic!("running {compiler}: {e}"));
        assert!(status.success(), "{compiler} rejected the header");
    }
}

/// Builds and runs a small C program against the static library.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libscanqa_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <string.h>
#include "scanqa.h"
int main(void) {
    char buf[32];
    size_t needed = 0;
    if (scanqa_nearest_color(0, 0, 250, buf, sizeof buf, &needed) != SCANQA_STATUS_OK) return 1;
    if (strcmp(buf, "blue") != 0 || needed != 5) return 2;
    ScanqaScene *scene = NULL;
    if (scanqa_scene_load_ply("/nonexistent.ply", &scene) != SCANQA_STATUS_ERR_IO) return 3;
    if (scene != NULL) return 4;
    char msg[256];
    scanqa_last_error_message(msg, sizeof msg, NULL);
    if (strstr(msg, "nonexistent") == NULL) return 5;
    ScanqaRejection r;
    if (scanqa_check_question("Is there a cabinet?", &r) != SCANQA_STATUS_OK || r != SCANQA_REJECTION_EXISTENCE) return 6;
    printf("ok %s\n", scanqa_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "linking against {} failed", lib.display());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

#[test]
fn model_answers_through_the_abi() {
    use scanqa::fusion::{save_checkpoint, Ablation, FusionConfig};
    use scanqa::geometry::{PeCodebook, ProposalConfig};
    use scanqa::linguistic::build_vocabulary;
    use scanqa::scene::load_ply;
    use scanqa::train::{predict_records, train, SceneBank, TrainConfig};

    let dir = tempfile::tempdir().unwrap();
    let ply = red_chair_scene(dir.path());
    let scene = load_ply(&ply).unwrap();
    let records: Vec<QaRecord> = (0..6)
        .map(|i| QaRecord {
            question_id: format!("q{i}"),
            scene_id: "room".into(),
            question: "what color is the chair".into(),
            answers: (0..4).map(|a| AnswerSubmission::new("red", Confidence::Yes, format!("a{a}")).unwrap()).collect(),
            split: Split::Train,
        })
        .collect();
    let tokens = build_vocabulary(&["what color is the chair"], 64).unwrap();
    let cfg = FusionConfig { d_h: 8, layers: 1, heads: 2, ff: 16, d_model: 4, f_g: 8, f_a: 8, max_positions: 16 };
    let bank = SceneBank::new(std::slice::from_ref(&scene), &ProposalConfig::default(), &PeCodebook::new(4).unwrap())
        .unwrap();

    for ablation in [Ablation::Full, Ablation::Qonly] {
        let tc = TrainConfig { epochs: 1, batch_size: 2, ablation, ..TrainConfig::default() };
        let ckpt = train(&records, &bank, &tokens, &cfg, &tc).unwrap().checkpoint;
        let expected = predict_records(&ckpt, &records[..1], &bank).unwrap().remove(0);
        let ckpt_dir = dir.path().join(ablation.to_string());
        save_checkpoint(&ckpt_dir, &ckpt).unwrap();

        let cdir = CString::new(ckpt_dir.to_str().unwrap()).unwrap();
        let cply = CString::new(ply.to_str().unwrap()).unwrap();
        let question = CString::new("what color is the chair").unwrap();
        let mut model: *mut ScanqaModel = ptr::null_mut();
        let mut scene_h: *mut ScanqaScene = ptr::null_mut();
        unsafe {
            assert_eq!(scanqa_model_load(cdir.as_ptr(), &mut model), ScanqaStatus::Ok);
            assert_eq!(scanqa_scene_load_ply(cply.as_ptr(), &mut scene_h), ScanqaStatus::Ok);
            assert_eq!(scanqa_model_num_answers(model), 1);
            let mut buf = [0 as c_char; 32];
            let mut score = f64::NAN;
            let st = scanqa_model_answer(model, scene_h, question.as_ptr(), buf.as_mut_ptr(), 32, ptr::null_mut(), &mut score);
            assert_eq!(st, ScanqaStatus::Ok, "{}", last_error());
            assert_eq!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap(), expected.answer);
            assert!(score.is_finite());

            let st = scanqa_model_answer(model, ptr::null(), question.as_ptr(), buf.as_mut_ptr(), 32, ptr::null_mut(), ptr::null_mut());
            let want = if ablation == Ablation::Qonly { ScanqaStatus::Ok } else { ScanqaStatus::ErrNullArgument };
            assert_eq!(st, want);
            scanqa_model_free(model);
            scanqa_scene_free(scene_h);
        }
    }
}
