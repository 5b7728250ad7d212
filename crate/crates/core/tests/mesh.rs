use proptest::prelude::*;
use vmsns::mesh::*;

fn boxed(ext: [f64; 3]) -> BoxDomain {
    BoxDomain::new([-0.5, 0.25, 1.0], [-0.5 + ext[0], 0.25 + ext[1], 1.0 + ext[2]])
}

/// Every interior facet is shared by two cells, every boundary facet by one.
fn facet_counts(m: &Mesh) -> (usize, usize) {
    let mut seen = std::collections::HashMap::new();
    for c in m.cells() {
        for skip in 0..c.len() {
            let mut f: Vec<usize> = c.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| *v).collect();
            f.sort_unstable();
            *seen.entry(f).or_insert(0usize) += 1;
        }
    }
    let boundary = seen.values().filter(|&&k| k == 1).count();
    assert!(seen.values().all(|&k| k == 1 || k == 2));
    (boundary, seen.len() - boundary)
}

#[test]
fn three_dimensional_cube() {
    let m = build_structured(3, 2, BoxDomain::unit()).unwrap();
    assert_eq!(m.n_vertices(), 27);
    assert_eq!(m.n_cells(), 6 * 8);
    assert!((m.total_volume() - 1.0).abs() < 1e-14);
    assert!(mesh_quality(&m).is_valid());
    let (boundary, _) = facet_counts(&m);
    assert_eq!(boundary, m.boundary_facets().len());
    assert_eq!(boundary, 6 * 2 * 4);
}

#[test]
fn boundary_facets_lie_on_their_faces() {
    let dom = boxed([2.0, 1.0, 0.0]);
    let m = build_structured(2, 5, dom).unwrap();
    for f in m.boundary_facets() {
        let (axis, high) = (f.tag / 2, f.tag % 2 == 1);
        let target = if high { dom.hi[axis] } else { dom.lo[axis] };
        assert!(f.vertices.iter().all(|&v| (m.vertices()[v][axis] - target).abs() < 1e-14));
    }
    let mask = m.boundary_vertex_mask();
    assert_eq!(mask.iter().filter(|b| **b).count(), 4 * 5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn structured_meshes_are_valid(n in 1usize..9, ex in 0.3f64..3.0, ey in 0.3f64..3.0) {
        let m = build_structured(2, n, boxed([ex, ey, 0.0])).unwrap();
        prop_assert_eq!(m.n_vertices(), (n + 1) * (n + 1));
        prop_assert!((m.total_volume() - ex * ey).abs() < 1e-12 * ex * ey);
        prop_assert!((0..m.n_cells()).all(|k| m.signed_volume(k) > 0.0));
        let (boundary, interior) = facet_counts(&m);
        prop_assert_eq!(boundary, 4 * n);
        prop_assert_eq!(boundary, m.boundary_facets().len());
        // Euler characteristic of a disk
        prop_assert_eq!(m.n_vertices() as i64 - (boundary + interior) as i64 + m.n_cells() as i64, 1);
    }

    #[test]
    fn refinement_preserves_volume_and_quality(n in 1usize..5) {
        let m = build_structured(2, n, BoxDomain::unit()).unwrap();
        let r = refine_uniform(&m);
        prop_assert_eq!(r.n_cells(), 4 * m.n_cells());
        prop_assert!((r.total_volume() - m.total_volume()).abs() < 1e-14);
        prop_assert!((r.h_max() - 0.5 * m.h_max()).abs() < 1e-14);
        let (q0, q1) = (mesh_quality(&m), mesh_quality(&r));
        prop_assert!(q1.is_valid());
        prop_assert!((q1.min_shape_ratio - q0.min_shape_ratio).abs() < 1e-12);
        prop_assert_eq!(r.boundary_facets().len(), 2 * m.boundary_facets().len());
    }
}
