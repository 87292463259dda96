use super::ast::quote_str;
use super::exec::ResultTable;
use super::value::Value;
use crate::scene_graph::{Point3, PropValue};

/// Rows shown to a model before truncation.
pub const DEFAULT_MAX_ROWS: usize = 50;

/// Plain-text table: a header of column names, then one line per row.
pub fn render_result(table: &ResultTable, max_rows: usize) -> String {
    let mut lines = vec![table.columns.join(" | ")];
    if table.rows.is_empty() {
        lines.push("(0 rows)".to_string());
    }
    for row in table.rows.iter().take(max_rows) {
        let cells: Vec<String> = row.iter().map(|v| render_value(table, v, false)).collect();
        lines.push(cells.join(" | "));
    }
    if table.rows.len() > max_rows {
        lines.push(format!("(truncated, {} total rows)", table.rows.len()));
    }
    lines.join("\n")
}

/// Float with at most three decimals and at least one.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Infinity" } else { "-Infinity" }.to_string();
    }
    let mut s = format!("{x:.3}");
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    if s == "-0.0" {
        s = "0.0".to_string();
    }
    s
}

pub fn format_point(p: &Point3) -> String {
    format!(
        "POINT({} {} {})",
        format_float(p.x),
        format_float(p.y),
        format_float(p.z)
    )
}

fn render_value(table: &ResultTable, v: &Value, nested: bool) -> String {
    match v {
        Value::Null => "null".to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Float(x) => format_float(*x),
        Value::Str(s) if nested => quote_str(s),
        Value::Str(s) => s.clone(),
        Value::Point(p) => format_point(p),
        Value::List(items) => {
            let parts: Vec<String> = items.iter().map(|i| render_value(table, i, true)).collect();
            format!("[{}]", parts.join(", "))
        }
        Value::Node(id) => match table.node(*id) {
            Some(n) => {
                let mut fields = vec![format!("nodeSymbol: {}", quote_str(&n.symbol.to_string()))];
                if let Some(c) = &n.class {
                    fields.push(format!("class: {}", quote_str(c)));
                }
                fields.push(format!("center: {}", format_point(&n.center)));
                for (k, v) in &n.extra {
                    fields.push(format!("{k}: {}", render_prop(v)));
                }
                format!("(:{} {{{}}})", n.symbol.layer().label(), fields.join(", "))
            }
            None => format!("(#{})", id.0),
        },
        Value::Edge(id) => match table.edge(*id) {
            Some(e) => {
                let arrow = if e.edge_type.is_undirected() { "-" } else { "->" };
                format!("({})-[:{}]{arrow}({})", e.source, e.edge_type, e.target)
            }
            None => format!("[#{}]", id.0),
        },
    }
}

fn render_prop(v: &PropValue) -> String {
    match v {
        PropValue::Bool(b) => b.to_string(),
        PropValue::Int(i) => i.to_string(),
        PropValue::Float(x) => format_float(*x),
        PropValue::Str(s) => quote_str(s),
        PropValue::Point(p) => format_point(p),
        PropValue::List(items) => {
            let parts: Vec<String> = items.iter().map(render_prop).collect();
            format!("[{}]", parts.join(", "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(columns: &[&str], rows: Vec<Vec<Value>>) -> ResultTable {
        let n = rows.len();
        ResultTable {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows,
            total_rows: n,
            properties_set: None,
            nodes: Default::default(),
            edges: Default::default(),
        }
    }

    #[test]
    fn single_cell() {
        let t = table(&["count(*)"], vec![vec![Value::Int(8)]]);
        assert_eq!(render_result(&t, 50), "count(*)\n8");
    }

    #[test]
    fn truncation_trailer() {
        let rows = (0..120).map(|i| vec![Value::Int(i)]).collect();
        let text = render_result(&table(&["n"], rows), 50);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 50 + 1);
        assert_eq!(lines[50], "49");
        assert_eq!(*lines.last().unwrap(), "(truncated, 120 total rows)");
    }

    #[test]
    fn empty_table() {
        assert_eq!(render_result(&table(&["a", "b"], vec![]), 50), "a | b\n(0 rows)");
    }

    #[test]
    fn number_and_point_formats() {
        assert_eq!(format_float(0.327872), "0.328");
        assert_eq!(format_float(8.0), "8.0");
        assert_eq!(format_float(-0.0001), "0.0");
        assert_eq!(format_float(2.5), "2.5");
        assert_eq!(format_point(&Point3::new(1.34, 3.28, -0.2)), "POINT(1.34 3.28 -0.2)");
        let t = table(
            &["xs"],
            vec![vec![Value::List(vec![
                Value::Str("a".into()),
                Value::Float(1.0),
                Value::Null,
            ])]],
        );
        assert_eq!(render_result(&t, 5), "xs\n['a', 1.0, null]");
    }
}
