use std::collections::{BTreeMap, BTreeSet};

use geosim::conformance::{
    check_coverage, matrix, profile_from_scenario, shipped_profile, shipped_profiles, ConformanceError, Mark,
    MethodologyProfile, CONCEPTS, TABLE1_CSV,
};
use geosim::dsl::{parse, validate};
use proptest::prelude::*;

const GAIA_NOTE: &str = "GAIA does not provide details on its internal architecture.";

/// Reads the checked-in table without the library: (concept, column) -> cell.
fn table_cells() -> (Vec<String>, BTreeMap<(String, String), String>) {
    let mut lines = TABLE1_CSV.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').skip(2).map(String::from).collect();
    let mut cells = BTreeMap::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), header.len() + 2);
        for (name, cell) in header.iter().zip(&fields[2..]) {
            cells.insert((fields[1].to_string(), name.clone()), cell.to_string());
        }
    }
    (header, cells)
}

#[test]
fn shipped_profiles_reproduce_the_table_cell_for_cell() {
    let (header, cells) = table_cells();
    let m = matrix(&shipped_profiles()).unwrap();
    let names: Vec<&str> = m.columns.iter().map(|c| c.profile.as_str()).collect();
    assert_eq!(names, header);
    assert_eq!(cells.len(), 17 * 9);
    for ((concept, name), cell) in &cells {
        let mark = m.cell(concept, name).unwrap();
        let expected = match cell.as_str() {
            "X" => Mark::Covered,
            "" => Mark::Uncovered,
            "†" => Mark::Annotated {
                covered: false,
                note: GAIA_NOTE.into(),
            },
            other => panic!("unexpected cell {other:?}"),
        };
        assert_eq!(mark, &expected, "{concept} / {name}");
    }
    assert_eq!(m.to_csv(), TABLE1_CSV);
}

#[test]
fn the_table_lists_every_concept_once_in_order() {
    let rows: Vec<&str> = TABLE1_CSV
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    let ids: Vec<&str> = CONCEPTS.iter().map(|c| c.id).collect();
    assert_eq!(rows, ids);
}

#[test]
fn aaii_covers_the_core_bdi_concepts() {
    let row = check_coverage(&shipped_profile("AAII").unwrap());
    let expected: BTreeSet<&str> = ["beliefs", "goals", "intention", "plan", "roles", "use_case"].into();
    assert_eq!(row.covered_ids(), expected);
}

#[test]
fn full_and_empty_profiles() {
    let all = MethodologyProfile::new("all", CONCEPTS.iter().map(|c| c.id)).unwrap();
    assert!(check_coverage(&all).marks.iter().all(|m| *m == Mark::Covered));
    let none = MethodologyProfile::new("none", Vec::<String>::new()).unwrap();
    assert!(check_coverage(&none).marks.iter().all(|m| *m == Mark::Uncovered));
    let m = matrix(&[none]).unwrap();
    assert_eq!(m.columns.len(), 1);
    assert!(m.footnotes().is_empty());
    assert!(m.to_csv().lines().skip(1).all(|l| l.ends_with(',')));
}

#[test]
fn only_mas_commonskads_has_every_internal_dynamic() {
    let m = matrix(&shipped_profiles()).unwrap();
    let dynamics = ["dynamics.update", "dynamics.activation", "dynamics.planning"];
    let full: Vec<&str> = m
        .columns
        .iter()
        .filter(|c| dynamics.iter().all(|d| c.mark(d).unwrap().is_covered()))
        .map(|c| c.profile.as_str())
        .collect();
    assert_eq!(full, ["MAS-CommonsKADS"]);
}

#[test]
fn children_do_not_imply_parents() {
    for name in ["GAIA", "MESSAGE/UML"] {
        let row = check_coverage(&shipped_profile(name).unwrap());
        assert!(row.mark("goals.achievement").unwrap().is_covered());
    }
    assert!(!check_coverage(&shipped_profile("gaia").unwrap())
        .mark("goals")
        .unwrap()
        .is_covered());
    let tropos = check_coverage(&shipped_profile("tropos").unwrap());
    assert_eq!(tropos.mark("use_case"), Some(&Mark::Uncovered));
}

#[test]
fn duplicate_and_unknown_names_are_errors() {
    let p = shipped_profile("mase").unwrap();
    assert_eq!(
        matrix(&[p.clone(), p]).unwrap_err(),
        ConformanceError::DuplicateProfile("MASE".into())
    );
    assert!(matches!(
        MethodologyProfile::new("x", ["desires"]),
        Err(ConformanceError::UnknownConcept { .. })
    ));
    assert!(matches!(
        shipped_profile("bogus"),
        Err(ConformanceError::UnknownProfile(_))
    ));
    assert_eq!(
        MethodologyProfile::new(" ", ["goals"]).unwrap_err(),
        ConformanceError::EmptyName
    );
}

#[test]
fn text_rendering_aligns_columns_and_prints_the_footnote() {
    let text = matrix(&shipped_profiles()).unwrap().to_text();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("ARM") && lines[0].ends_with("O-MaSE"));
    let beliefs = lines.iter().find(|l| l.trim_start().starts_with("Beliefs")).unwrap();
    let gaia_col = lines[0].find("GAIA").unwrap();
    assert_eq!(beliefs.chars().nth(lines[0][..gaia_col].chars().count()), Some('†'));
    assert_eq!(*lines.last().unwrap(), format!("† {GAIA_NOTE}"));
    for heading in [
        "Internal state",
        "Internal dynamics",
        "External state",
        "Interface",
        "  Skills",
    ] {
        assert!(lines.contains(&heading), "{heading}");
    }
}

fn profile_of(src: &str) -> BTreeSet<String> {
    let doc = parse(src).unwrap();
    assert!(!validate(&doc).has_errors(), "{:?}", validate(&doc));
    profile_from_scenario(&doc).covered().clone()
}

fn set(ids: &[&str]) -> BTreeSet<String> {
    ids.iter().map(|s| s.to_string()).collect()
}

#[test]
fn scenario_profiles_follow_declared_blocks() {
    let goals_and_plans = r#"
grid lattice 3 3 clamp
agent_type a {
    state { done: bool = false }
    transition identity
    goal achieve finish when self.done
    action go {
        done = true
    }
    plan route for finish: go
}
layer l { populate 1 a vacant }
run { ticks 1 }
"#;
    assert_eq!(
        profile_of(goals_and_plans),
        set(&["goals", "goals.achievement", "plan", "skills.capabilities"])
    );

    let empty = "grid lattice 3 3 clamp\nagent_type a {\n    transition identity\n}\nlayer l { populate 1 a vacant }\nrun { ticks 1 }\n";
    assert!(profile_of(empty).is_empty());

    let farmers = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/farmers.gsc")).unwrap();
    let covered = profile_of(&farmers);
    assert!(covered.is_superset(&set(&["beliefs", "preference", "dynamics.update"])));
    assert!(!covered.contains("plan.maintenance"));
}

proptest! {
    #[test]
    fn loadable_profiles_stay_inside_the_concept_set(ids in proptest::collection::vec("[a-z_.]{1,20}", 0..6)) {
        let known: BTreeSet<&str> = CONCEPTS.iter().map(|c| c.id).collect();
        match MethodologyProfile::new("p", ids.clone()) {
            Ok(p) => prop_assert!(p.covered().iter().all(|c| known.contains(c.as_str()))),
            Err(e) => {
                let unknown = matches!(e, ConformanceError::UnknownConcept { .. });
                prop_assert!(unknown);
                prop_assert!(ids.iter().any(|c| !known.contains(c.as_str())));
            }
        }
    }
}
