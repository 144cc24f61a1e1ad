mod common;

use common::decode_op;
use jianzhi_core::moodboard::{Canvas, SceneGraph};
use jianzhi_studio::session::Session;
use jianzhi_studio::svg::{export_svg, import_svg, ExportOptions};
use proptest::prelude::*;

fn codes() -> impl Strategy<Value = Vec<(u8, u8, u8, i16)>> {
    proptest::collection::vec((any::<u8>(), any::<u8>(), any::<u8>(), any::<i16>()), 1..80)
}

/// Drive a session with decoded ops, keeping only those that apply.
fn run_session(codes: &[(u8, u8, u8, i16)]) -> Session {
    let mut s = Session::new("s1".into(), Canvas::default());
    for (step, code) in codes.iter().enumerate() {
        let op = decode_op(&s.board, step, *code);
        let _ = s.apply_op(op, s.board_version);
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn svg_round_trip_is_byte_stable(codes in codes(), scale in proptest::option::of(0.05f64..2.0)) {
        let board = run_session(&codes).board;
        let opts = ExportOptions { mm_per_unit: scale };
        let first = export_svg(&board, opts);
        let imported = import_svg(first.as_bytes()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&imported, &board);
        prop_assert_eq!(export_svg(&imported, opts), first);
    }

    #[test]
    fn sessions_are_deterministic(codes in codes()) {
        let a = run_session(&codes);
        let b = run_session(&codes);
        prop_assert_eq!(a.to_json(), b.to_json());
        let reloaded = Session::from_json(&a.to_json()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&reloaded, &a);
        prop_assert_eq!(SceneGraph::replay(a.board.canvas, &a.op_log).unwrap(), a.board);
    }

    #[test]
    fn undo_restores_every_prefix(codes in codes()) {
        let mut s = run_session(&codes);
        let mut boards = Vec::new();
        for n in 0..=s.op_log.len() {
            boards.push(SceneGraph::replay(s.board.canvas, &s.op_log[..n]).unwrap());
        }
        while !s.op_log.is_empty() {
            s.undo(s.board_version).unwrap();
            prop_assert_eq!(&s.board, &boards[s.op_log.len()]);
        }
    }
}
