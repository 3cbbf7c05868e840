"""Emit the clustered delay line implied by the default inter-cluster fits
and compare it with the reference table bundled with the package.

Run: python demos/04_cdl_table.py
"""

from agchan.synthesis import cdl_report, cdl_to_csv, emit_cdl

entries = emit_cdl()
print(cdl_to_csv(entries))

rep = cdl_report(entries)
for row in rep.divergence:
    mark = "!" if row["flagged"] else " "
    print(f"{mark} index {row['index']:2d}: generated {row['generated_delay_ns']:7.2f} ns,"
          f" table {row['table_delay_ns']:7.2f} ns, rel diff {row['relative_difference']:.3%}")
print("rows beyond tolerance:", rep.diverges)
