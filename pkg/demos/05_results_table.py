"""Score predictions and render a results table plus a CSV feed for charts.

Run: python3 demos/05_results_table.py
"""
from hmgnn.cli import emit_results_table
from hmgnn.data_eval import accuracy, confusion_matrix, macro_f1, per_class_f1

golds = [0, 0, 1, 1, 2, 2]
preds = [0, 0, 1, 1, 2, 0]
print("confusion (rows = gold):")
print(confusion_matrix(preds, golds))
print("per-class F1:", [round(float(f), 4) for f in per_class_f1(preds, golds)])
print(f"accuracy {accuracy(preds, golds):.4f}, macro F1 {macro_f1(preds, golds):.4f}")

text, csv = emit_results_table([
    ("toy", "demo", 100 * accuracy(preds, golds), 100 * macro_f1(preds, golds)),
])
print()
print(text)
print()
print(csv)
