//! Model files: a nested-conditional listing that doubles as the
//! deployable form and is parsed back exactly.

use super::features::{Affine, Scaling, FEATURE_NAMES};
use super::tree::{ModelError, OrdinalTreeModel, TreeKind, TreeNode};

/// Estimated bytes per node once compiled onto a mote: a class byte per
/// leaf; feature index, f32 threshold and child offset per axis split;
/// four f32 coefficients and a child offset per hyperplane. Feature
/// scaling folds into the coefficients and costs nothing extra.
pub const LEAF_BYTES: usize = 1;
pub const AXIS_BYTES: usize = 6;
pub const OBLIQUE_BYTES: usize = 17;

#[derive(Debug, Clone, PartialEq)]
pub struct ExportReport {
    pub text: String,
    pub nodes: usize,
    pub depth: usize,
    pub footprint_bytes: usize,
}

pub fn footprint_bytes(m: &OrdinalTreeModel) -> usize {
    m.nodes
        .iter()
        .map(|n| match n {
            TreeNode::Leaf { .. } => LEAF_BYTES,
            TreeNode::Axis { .. } => AXIS_BYTES,
            TreeNode::Oblique { .. } => OBLIQUE_BYTES,
        })
        .sum()
}

pub fn export_model(m: &OrdinalTreeModel) -> Result<ExportReport, ModelError> {
    m.validate()?;
    let nodes = m.nodes.len();
    let depth = m.depth();
    let footprint = footprint_bytes(m);
    let mut s = String::new();
    s.push_str("# edrp ordinal tree v1\n");
    s.push_str(&format!(
        "# kind: {}, classes: {}, max_depth: {}, nodes: {nodes}, depth: {depth}, footprint: {footprint}\n",
        m.kind.name(),
        m.n_classes,
        m.max_depth
    ));
    for (i, a) in m.scaling.0.iter().enumerate() {
        s.push_str(&format!(
            "x{i} = (clamp({}, {:?}, {:?}) - {:?}) * {:?}\n",
            FEATURE_NAMES[i], a.min, a.max, a.offset, a.factor
        ));
    }
    write_node(m, 0, 0, &mut s);
    Ok(ExportReport { text: s, nodes, depth, footprint_bytes: footprint })
}

fn write_node(m: &OrdinalTreeModel, i: usize, indent: usize, s: &mut String) {
    let pad = "    ".repeat(indent);
    match m.nodes[i] {
        TreeNode::Leaf { class } => s.push_str(&format!("{pad}return {class}\n")),
        TreeNode::Axis { feature, threshold, left, right } => {
            s.push_str(&format!("{pad}if x{feature} < {threshold:?} {{\n"));
            write_node(m, left, indent + 1, s);
            s.push_str(&format!("{pad}}} else {{\n"));
            write_node(m, right, indent + 1, s);
            s.push_str(&format!("{pad}}}\n"));
        }
        TreeNode::Oblique { w, b, left, right } => {
            s.push_str(&format!("{pad}if {:?} * x0 + {:?} * x1 + {:?} * x2 + {b:?} >= 0 {{\n", w[0], w[1], w[2]));
            write_node(m, right, indent + 1, s);
            s.push_str(&format!("{pad}}} else {{\n"));
            write_node(m, left, indent + 1, s);
            s.push_str(&format!("{pad}}}\n"));
        }
    }
}

struct Parser<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
    nodes: Vec<TreeNode>,
    kind: Option<TreeKind>,
}

fn perr<T>(line: usize, msg: impl Into<String>) -> Result<T, ModelError> {
    Err(ModelError::Parse { line, msg: msg.into() })
}

fn num(line: usize, s: &str) -> Result<f64, ModelError> {
    s.trim().parse::<f64>().or_else(|_| perr(line, format!("bad number `{s}`")))
}

impl<'a> Parser<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), ModelError> {
        let l = self.lines.get(self.pos).copied();
        self.pos += 1;
        match l {
            Some(l) => Ok(l),
            None => perr(self.lines.last().map_or(1, |l| l.0), "unexpected end of tree"),
        }
    }

    fn expect(&mut self, want: &str) -> Result<(), ModelError> {
        let (ln, l) = self.next()?;
        if l != want {
            return perr(ln, format!("expected `{want}`, found `{l}`"));
        }
        Ok(())
    }

    fn node(&mut self) -> Result<usize, ModelError> {
        let (ln, l) = self.next()?;
        let me = self.nodes.len();
        if let Some(c) = l.strip_prefix("return ") {
            let class = c.trim().parse().or_else(|_| perr(ln, format!("bad class `{c}`")))?;
            self.nodes.push(TreeNode::Leaf { class });
            return Ok(me);
        }
        let Some(cond) = l.strip_prefix("if ").and_then(|c| c.strip_suffix(" {")) else {
            return perr(ln, format!("expected `if` or `return`, found `{l}`"));
        };
        self.nodes.push(TreeNode::Leaf { class: 0 });
        if let Some(rest) = cond.strip_suffix(" >= 0") {
            self.check_kind(ln, TreeKind::Oblique)?;
            let terms: Vec<&str> = rest.split(" + ").collect();
            if terms.len() != 4 {
                return perr(ln, "hyperplane needs three terms and a bias");
            }
            let mut w = [0.0; 3];
            for (j, t) in terms[..3].iter().enumerate() {
                let Some(coef) = t.strip_suffix(&format!(" * x{j}")) else {
                    return perr(ln, format!("bad term `{t}`"));
                };
                w[j] = num(ln, coef)?;
            }
            let b = num(ln, terms[3])?;
            let right = self.node()?;
            self.expect("} else {")?;
            let left = self.node()?;
            self.expect("}")?;
            self.nodes[me] = TreeNode::Oblique { w, b, left, right };
        } else {
            self.check_kind(ln, TreeKind::AxisAligned)?;
            let Some((var, thr)) = cond.split_once(" < ") else {
                return perr(ln, format!("bad condition `{cond}`"));
            };
            let feature = match var {
                "x0" => 0,
                "x1" => 1,
                "x2" => 2,
                _ => return perr(ln, format!("unknown variable `{var}`")),
            };
            let threshold = num(ln, thr)?;
            let left = self.node()?;
            self.expect("} else {")?;
            let right = self.node()?;
            self.expect("}")?;
            self.nodes[me] = TreeNode::Axis { feature, threshold, left, right };
        }
        Ok(me)
    }

    fn check_kind(&mut self, ln: usize, k: TreeKind) -> Result<(), ModelError> {
        match self.kind {
            Some(have) if have != k => perr(ln, "split type does not match the declared kind"),
            _ => {
                self.kind = Some(k);
                Ok(())
            }
        }
    }
}

fn parse_scale(ln: usize, l: &str, i: usize) -> Result<Affine, ModelError> {
    let prefix = format!("x{i} = (clamp({}, ", FEATURE_NAMES[i]);
    let Some(rest) = l.strip_prefix(&prefix) else {
        return perr(ln, format!("expected scaling line for x{i}"));
    };
    let Some((args, factor)) = rest.split_once(") * ") else {
        return perr(ln, "bad scaling line");
    };
    let Some((clamp, offset)) = args.split_once(") - ") else {
        return perr(ln, "bad scaling line");
    };
    let Some((min, max)) = clamp.split_once(", ") else {
        return perr(ln, "bad clamp bounds");
    };
    Ok(Affine { min: num(ln, min)?, max: num(ln, max)?, offset: num(ln, offset)?, factor: num(ln, factor)? })
}

/// Parses a listing written by [`export_model`].
pub fn import_model(text: &str) -> Result<OrdinalTreeModel, ModelError> {
    let all: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).collect();
    let Some(&(_, magic)) = all.first() else {
        return perr(1, "empty model file");
    };
    if magic != "# edrp ordinal tree v1" {
        return perr(1, "not an edrp tree v1 file");
    }
    let (hl, header) = all.get(1).copied().ok_or(ModelError::Parse { line: 2, msg: "missing header".into() })?;
    let mut kind = None;
    let mut classes = None;
    let mut max_depth = None;
    for kv in header.trim_start_matches('#').split(',') {
        let Some((k, v)) = kv.split_once(':') else { continue };
        match k.trim() {
            "kind" => {
                kind = Some(match v.trim() {
                    "axis" => TreeKind::AxisAligned,
                    "oblique" => TreeKind::Oblique,
                    other => return perr(hl, format!("unknown kind `{other}`")),
                })
            }
            "classes" => classes = v.trim().parse().ok(),
            "max_depth" => max_depth = v.trim().parse().ok(),
            _ => {}
        }
    }
    let (Some(kind), Some(n_classes), Some(max_depth)) = (kind, classes, max_depth) else {
        return perr(hl, "header needs kind, classes and max_depth");
    };
    let body: Vec<(usize, &str)> = all[2..].iter().copied().filter(|(_, l)| !l.is_empty()).collect();
    if body.len() < 4 {
        return perr(all.len(), "missing scaling lines or tree");
    }
    let mut scaling = Scaling::identity();
    for i in 0..3 {
        scaling.0[i] = parse_scale(body[i].0, body[i].1, i)?;
    }
    let mut p = Parser { lines: body[3..].to_vec(), pos: 0, nodes: Vec::new(), kind: Some(kind) };
    p.node()?;
    if let Some(&(ln, extra)) = p.lines.get(p.pos) {
        return perr(ln, format!("trailing content `{extra}`"));
    }
    let m = OrdinalTreeModel { kind, nodes: p.nodes, max_depth, n_classes, scaling };
    m.validate()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_model_is_one_return() {
        let r = export_model(&OrdinalTreeModel::constant(2, 3)).unwrap();
        assert_eq!(r.text.lines().filter(|l| l.contains("return")).count(), 1);
        assert!(r.footprint_bytes < 300);
        assert_eq!(import_model(&r.text).unwrap(), OrdinalTreeModel::constant(2, 3));
    }

    #[test]
    fn empty_tree_rejected() {
        let mut m = OrdinalTreeModel::constant(0, 3);
        m.nodes.clear();
        assert!(export_model(&m).is_err());
    }

    #[test]
    fn garbage_reports_line() {
        let r = export_model(&OrdinalTreeModel::constant(1, 3)).unwrap();
        let broken = r.text.replace("return 1", "retrun 1");
        assert!(matches!(import_model(&broken), Err(ModelError::Parse { line: 6, .. })));
    }
}
