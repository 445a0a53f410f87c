use std::collections::BTreeMap;

use geosim::arm::{ActionIntent, ActionSpec, GoalId};
use geosim::gas::{AutomatonType, Boundary, FieldDecl, GasModel, GeoRefConvention, Location, NeighborhoodSpec};
use geosim::magi::{
    agree, apply_global_functions, decide, perceive, AgentTypeTau, AgreementFn, DecisionFn, EntityKind, EntitySpec,
    Environment, Layer, MagiError, PerceptionFn, Shape,
};
use geosim::percept::Percept;
use geosim::rule::{Assign, BinOp, Expr};
use geosim::{EntityId, SeedStreams, Ty, Value};
use proptest::prelude::*;

fn world(types: Vec<AgentTypeTau>) -> Environment {
    let mut model = GasModel::new(GeoRefConvention::lattice(10, 10, Boundary::Clamp));
    let mut taus = BTreeMap::new();
    for tau in types {
        let schema = [(
            "energy".to_string(),
            FieldDecl {
                ty: Ty::Num,
                default: Value::Num(1.0),
            },
        )]
        .into_iter()
        .collect();
        model.types.insert(
            tau.name.clone(),
            AutomatonType::identity(schema, NeighborhoodSpec::Moore(1)),
        );
        taus.insert(tau.name.clone(), tau);
    }
    let mut env = Environment::new(model, taus);
    env.add_layer(Layer::new("ground")).unwrap();
    env
}

fn rock() -> AgentTypeTau {
    AgentTypeTau::new("rock", EntityKind::Object)
}

fn walker() -> AgentTypeTau {
    let mut t = AgentTypeTau::new("walker", EntityKind::Agent);
    t.perception.push(PerceptionFn::Entities {
        radius: 2.0,
        filter: None,
    });
    t
}

fn at(ty: &str, x: i64, y: i64) -> EntitySpec {
    EntitySpec::new(ty, Location::Cell(x, y))
}

fn streams() -> SeedStreams {
    SeedStreams::new(5)
}

#[test]
fn creation_allocates_monotonic_ids() {
    let mut env = world(vec![rock()]);
    assert_eq!(env.create_entity("ground", at("rock", 0, 0)).unwrap(), EntityId(0));
    assert_eq!(env.len(), 1);
    assert_eq!(env.create_entity("ground", at("rock", 1, 0)).unwrap(), EntityId(1));
    env.destroy_entity(EntityId(1)).unwrap();
    assert_eq!(env.create_entity("ground", at("rock", 1, 0)).unwrap(), EntityId(2));
}

#[test]
fn creation_errors() {
    let mut env = world(vec![rock()]);
    let mut disc = at("rock", 0, 0);
    disc.shape = Some(Shape::Disc { radius: 1.0 });
    assert!(matches!(
        env.create_entity("ground", disc),
        Err(MagiError::InadmissibleShape { .. })
    ));
    assert_eq!(
        env.create_entity("sky", at("rock", 0, 0)),
        Err(MagiError::UnknownLayer("sky".into()))
    );
    assert!(matches!(
        env.create_entity("ground", at("rock", 10, 0)),
        Err(MagiError::OutOfBounds(_))
    ));
    assert!(env.is_empty());
}

#[test]
fn destruction_purges_references() {
    let mut env = world(vec![rock(), walker()]);
    let w = env.create_entity("ground", at("walker", 0, 0)).unwrap();
    let r = env.create_entity("ground", at("rock", 1, 0)).unwrap();
    let r2 = env.create_entity("ground", at("rock", 0, 1)).unwrap();
    env.entity_mut(w).unwrap().observed = [r, r2].into_iter().collect();
    env.destroy_entity(r).unwrap();
    assert_eq!(env.entity(w).unwrap().observed.len(), 1);
    env.check_references().unwrap();
    assert_eq!(
        env.destroy_entity(EntityId(99)),
        Err(MagiError::UnknownEntity(EntityId(99)))
    );

    let mut solo = world(vec![rock()]);
    let id = solo.create_entity("ground", at("rock", 3, 3)).unwrap();
    solo.destroy_entity(id).unwrap();
    assert!(solo.layer("ground").unwrap().entities.is_empty());
}

#[test]
fn perception_range() {
    let mut env = world(vec![rock(), walker()]);
    let w = env.create_entity("ground", at("walker", 5, 5)).unwrap();
    for (x, y) in [(6, 5), (7, 7), (8, 5)] {
        env.create_entity("ground", at("rock", x, y)).unwrap();
    }
    let p = perceive(&env, w, 1, streams()).unwrap();
    let seen: Vec<EntityId> = p
        .iter()
        .map(|p| match p {
            Percept::Entity { source, .. } => *source,
            Percept::Param { .. } => unreachable!(),
        })
        .collect();
    assert_eq!(seen, vec![EntityId(1), EntityId(2)]);
}

#[test]
fn perception_radius_zero_and_none() {
    let mut blind = walker();
    blind.perception.clear();
    let mut near = walker();
    near.name = "near".into();
    near.perception = vec![
        PerceptionFn::Entities {
            radius: 0.0,
            filter: None,
        },
        PerceptionFn::Param("wind".into()),
    ];
    let mut env = world(vec![rock(), blind, near]);
    env.global_params.insert("wind".into(), Value::Num(3.0));
    let b = env.create_entity("ground", at("walker", 2, 2)).unwrap();
    let n = env.create_entity("ground", at("near", 2, 2)).unwrap();
    env.create_entity("ground", at("rock", 2, 3)).unwrap();
    assert!(perceive(&env, b, 1, streams()).unwrap().is_empty());
    let p = perceive(&env, n, 1, streams()).unwrap();
    assert_eq!(p.len(), 2);
    assert!(matches!(&p[0], Percept::Entity { source, .. } if *source == b));
    assert_eq!(
        p[1],
        Percept::Param {
            name: "wind".into(),
            value: Value::Num(3.0)
        }
    );
}

fn chooser(precondition: Expr) -> AgentTypeTau {
    let mut t = walker();
    t.skills.capabilities.insert(
        "rest".into(),
        ActionSpec::new("rest", precondition, vec![Assign::new("energy", Expr::num(2.0))]),
    );
    t.decisions.push(DecisionFn {
        action: "rest".into(),
        when: Expr::boolean(true),
    });
    t
}

#[test]
fn decisions() {
    let mut env = world(vec![walker()]);
    let w = env.create_entity("ground", at("walker", 0, 0)).unwrap();
    assert!(decide(&env, w, &[], 1, streams()).unwrap().is_empty());

    let mut env = world(vec![chooser(Expr::boolean(true))]);
    let w = env.create_entity("ground", at("walker", 0, 0)).unwrap();
    assert_eq!(
        decide(&env, w, &[], 1, streams()).unwrap(),
        vec![ActionIntent::new("rest")]
    );

    let tired = Expr::bin(BinOp::Lt, Expr::field("energy"), Expr::num(0.5));
    let mut env = world(vec![chooser(tired)]);
    let w = env.create_entity("ground", at("walker", 0, 0)).unwrap();
    assert!(decide(&env, w, &[], 1, streams()).unwrap().is_empty());
}

fn lifter() -> AgentTypeTau {
    let mut t = walker();
    let mut lift = ActionSpec::new("lift", Expr::boolean(true), vec![]);
    lift.joint = true;
    t.skills.capabilities.insert("lift".into(), lift);
    t.agreements.push(AgreementFn {
        action: "lift".into(),
        goal: GoalId::new("carry"),
        within: 1.0,
    });
    t
}

#[test]
fn pairwise_agreement() {
    let mut env = world(vec![lifter()]);
    let a = env.create_entity("ground", at("walker", 0, 0)).unwrap();
    let b = env.create_entity("ground", at("walker", 1, 0)).unwrap();
    let c = env.create_entity("ground", at("walker", 5, 5)).unwrap();
    assert_eq!(agree(&env, &[], 1, 0).unwrap().commitments, vec![]);

    let lift = ActionIntent::new("lift");
    let both = agree(&env, &[(a, lift.clone()), (b, lift.clone())], 3, 0).unwrap();
    assert_eq!(both.commitments.len(), 1);
    assert_eq!(both.commitments[0].members, [a, b].into_iter().collect());
    assert_eq!(both.commitments[0].goal, GoalId::new("carry"));
    assert_eq!(both.commitments[0].origin_tick, 3);
    assert_eq!(both.accepted.len(), 2);

    let alone = agree(&env, &[(c, lift.clone())], 3, 0).unwrap();
    assert!(alone.commitments.is_empty());
    assert!(alone.accepted.is_empty());

    let three = agree(&env, &[(c, lift.clone()), (a, lift.clone()), (b, lift)], 3, 7).unwrap();
    assert_eq!(three.commitments.len(), 1);
    assert_eq!(three.commitments[0].id.0, 7);
    assert_eq!(three.accepted.iter().map(|(w, _)| *w).collect::<Vec<_>>(), vec![a, b]);
}

#[test]
fn parameter_functions() {
    let mut env = world(vec![]);
    env.global_params.insert("p".into(), Value::Num(4.0));
    let before = env.clone();
    apply_global_functions(&mut env, 1, streams()).unwrap();
    assert_eq!(env, before);

    env.global_functions.push(Assign::new(
        "p",
        Expr::bin(BinOp::Mul, Expr::num(0.5), Expr::param("p")),
    ));
    apply_global_functions(&mut env, 1, streams()).unwrap();
    assert_eq!(env.global_params["p"], Value::Num(2.0));

    let mut env = world(vec![]);
    env.global_params.insert("p".into(), Value::Num(0.0));
    env.global_functions.push(Assign::new(
        "p",
        Expr::bin(BinOp::Add, Expr::param("p"), Expr::num(1.0)),
    ));
    env.global_functions.push(Assign::new(
        "p",
        Expr::bin(BinOp::Mul, Expr::num(2.0), Expr::param("p")),
    ));
    apply_global_functions(&mut env, 1, streams()).unwrap();
    assert_eq!(env.global_params["p"], Value::Num(2.0));
}

#[test]
fn layer_functions_see_updated_globals_and_shadow_them() {
    let mut env = world(vec![]);
    env.global_params.insert("g".into(), Value::Num(1.0));
    env.global_functions.push(Assign::new("g", Expr::num(10.0)));
    let layer = env.layer_mut("ground").unwrap();
    layer.params.insert("h".into(), Value::Num(0.0));
    layer.functions.push(Assign::new(
        "h",
        Expr::bin(BinOp::Add, Expr::param("g"), Expr::num(1.0)),
    ));
    apply_global_functions(&mut env, 1, streams()).unwrap();
    assert_eq!(env.layer("ground").unwrap().params["h"], Value::Num(11.0));

    let mut bad = env.clone();
    bad.global_functions.push(Assign::new("g", Expr::boolean(true)));
    let snapshot = bad.clone();
    assert!(apply_global_functions(&mut bad, 2, streams()).is_err());
    assert_eq!(bad, snapshot);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lifecycle_keeps_ids_monotone_and_references_live(ops in prop::collection::vec((any::<bool>(), 0u8..10, 0u8..10), 1..40)) {
        let mut env = world(vec![rock(), walker()]);
        let mut last: Option<EntityId> = None;
        for (create, x, y) in ops {
            if create || env.is_empty() {
                let id = env.create_entity("ground", at("walker", i64::from(x), i64::from(y))).unwrap();
                prop_assert!(last.is_none_or(|l| id > l));
                last = Some(id);
                let seen = perceive(&env, id, 0, streams()).unwrap();
                let observed = seen.iter().filter_map(|p| match p { Percept::Entity { source, .. } => Some(*source), _ => None }).collect();
                env.entity_mut(id).unwrap().observed = observed;
            } else {
                let ids = env.entity_ids();
                let victim = ids[(usize::from(x) * 7 + usize::from(y)) % ids.len()];
                env.destroy_entity(victim).unwrap();
            }
            prop_assert!(env.check_references().is_ok());
        }
    }

    #[test]
    fn far_entities_do_not_change_percepts(fx in 5i64..10, fy in 5i64..10) {
        let mut env = world(vec![rock(), walker()]);
        let w = env.create_entity("ground", at("walker", 1, 1)).unwrap();
        env.create_entity("ground", at("rock", 2, 2)).unwrap();
        let before = perceive(&env, w, 1, streams()).unwrap();
        let far = env.create_entity("ground", at("rock", fx, fy)).unwrap();
        prop_assert_eq!(&perceive(&env, w, 1, streams()).unwrap(), &before);
        env.destroy_entity(far).unwrap();
        prop_assert_eq!(perceive(&env, w, 1, streams()).unwrap(), before);
    }

    #[test]
    fn commitments_only_bind_proposers(positions in prop::collection::vec((0i64..10, 0i64..10, any::<bool>()), 1..12)) {
        let mut env = world(vec![lifter()]);
        let mut proposals = Vec::new();
        for (x, y, proposes) in positions {
            let id = env.create_entity("ground", at("walker", x, y)).unwrap();
            if proposes {
                proposals.push((id, ActionIntent::new("lift")));
            }
        }
        let out = agree(&env, &proposals, 0, 0).unwrap();
        for c in &out.commitments {
            prop_assert_eq!(c.members.len(), 2);
            for m in &c.members {
                prop_assert!(proposals.iter().any(|(p, _)| p == m));
            }
        }
    }
}
