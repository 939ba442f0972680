//! Iterative Tarjan strongly connected components over adjacency lists.

/// Components in reverse topological order (sinks first), as Tarjan emits them.
pub fn tarjan<F, I>(n: usize, mut successors: F) -> Vec<Vec<usize>>
where
    F: FnMut(usize) -> I,
    I: IntoIterator<Item = usize>,
{
    const UNVISITED: usize = usize::MAX;
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut next_index = 0usize;

    // call frames: (vertex, its successor list, position in that list)
    let mut frames: Vec<(usize, Vec<usize>, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        frames.push((root, successors(root).into_iter().collect(), 0));

        while let Some(frame) = frames.last_mut() {
            let v = frame.0;
            if frame.2 < frame.1.len() {
                let w = frame.1[frame.2];
                frame.2 += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, successors(w).into_iter().collect(), 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            frames.pop();
            if let Some(parent) = frames.last() {
                let p = parent.0;
                low[p] = low[p].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                components.push(comp);
            }
        }
    }
    components
}

/// Maps each vertex to the index of its component in `components`.
pub fn component_ids(n: usize, components: &[Vec<usize>]) -> Vec<usize> {
    let mut ids = vec![0; n];
    for (c, comp) in components.iter().enumerate() {
        for &v in comp {
            ids[v] = c;
        }
    }
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cycles_and_a_tail() {
        // 0 -> 1 -> 0, 1 -> 2, 2 -> 3 -> 2, 4 -> 0
        let adj = vec![vec![1], vec![0, 2], vec![3], vec![2], vec![0]];
        let comps = tarjan(adj.len(), |v| adj[v].clone());
        assert_eq!(comps.len(), 3);
        assert_eq!(comps[0], vec![2, 3]);
        assert_eq!(comps[1], vec![0, 1]);
        assert_eq!(comps[2], vec![4]);
    }

    #[test]
    fn deep_chain_does_not_recurse() {
        let n = 200_000;
        let comps = tarjan(n, |v| if v + 1 < n { vec![v + 1] } else { vec![] });
        assert_eq!(comps.len(), n);
    }
}
