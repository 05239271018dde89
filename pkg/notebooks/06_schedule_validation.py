"""
Checking step-size, bandwidth and mixture schedules
===================================================

The validator works on power-law descriptors with exact rational
arithmetic and reports pass, fail or indeterminate together with every
individual check.
"""

from midas import PowerLaw, Schedule, ScheduleFamily, validate_schedule


def show(label, family, eta, d):
    r = validate_schedule(family, eta, d)
    print(f"{label:<40} {r.status:<14} {r.reason}")
    for name, ok in r.checks:
        print(f"    {name:<36} {ok}")


show("gamma=2/n, b=n^-1/6, lambda=1/log, eta=0.75", ScheduleFamily(PowerLaw(2.0, 1.0), PowerLaw(1.0, 1 / 6), "log"), 0.75, 2)
show("gamma=n^-0.4", ScheduleFamily(PowerLaw(1.0, 0.4), PowerLaw(1.0, 1 / 6), "log"), 0.75, 2)
show("d=10, eta=0.25", ScheduleFamily(PowerLaw(2.0, 1.0), PowerLaw(1.0, 1 / 14), "log"), 0.25, 10)
show("package defaults, eta=0.75", ScheduleFamily.from_schedule(Schedule(), 2), 0.75, 2)
show("defaults with gamma_scale=2", ScheduleFamily.from_schedule(Schedule(gamma_scale=2.0), 2), 0.75, 2)
