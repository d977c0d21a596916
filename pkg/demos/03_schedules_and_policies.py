"""Render the four pipeline execution policies side by side.

Uses a four-stage, six-micro-batch setting where inter-stage transfers take
longer than one micro-batch of compute — the regime where the policies
differ most.  Decoupling weight-gradient work (the zero-bubble variants)
lets stages fill transfer gaps, and the compact variant finishes first.
"""

from geopipe import Policy, bubble_fraction, generate_schedule, make_timing
from geopipe.timeline import render_text


def main():
    timing = make_timing(
        fwd=[1.0] * 4, bwd=[1.0] * 4, wgt=[1.0] * 4,
        transfer=[1.5] * 3,
        microbatch=1, micro_count=6,
    )

    for policy in Policy:
        schedule = generate_schedule(timing, policy)
        bubbles = bubble_fraction(schedule)
        print(f"=== {policy.value}  makespan={schedule.makespan:.1f}s  "
              f"max bubble={max(bubbles):.2f} ===")
        print(render_text(schedule, width=76))
        print()


if __name__ == "__main__":
    main()
