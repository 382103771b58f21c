use regadj_bench::{population, scenario_draw};

#[test]
fn fixtures_are_deterministic() {
    let a = scenario_draw(1, 500, 3);
    let b = scenario_draw(1, 500, 3);
    assert_eq!(a.data.y(), b.data.y());
    assert_eq!(a.data.n(), 500);
    assert_eq!(population(3, 1).to_json(), population(3, 1).to_json());
    assert_eq!(population(3, 1).p(), 3);
}
