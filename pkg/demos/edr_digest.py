"""The event data recorder as a proactive shared secret.

A keyfob that drove the car last holds the same window of events and so the
same digest; a spare keyfob that missed the latest events does not.
"""

from perimeter.edr import EventRecord, MobilityPattern, digest, guess_space_size, replicate

car = MobilityPattern(window_us=5_000_000)
for t, kind, value in [(0.0, "velocity", 8.0), (1.5, "acceleration", 1.2), (3.0, "steering-angle", -6.5)]:
    car.record(EventRecord.from_float(t, kind, value))

spare = replicate(car)
car.record(EventRecord.from_float(4.0, "deceleration", 2.0))
in_use = replicate(car)

print("car     ", digest(car).hex()[:32])
print("in use  ", digest(in_use).hex()[:32], "match" if digest(in_use) == digest(car) else "MISMATCH")
print("spare   ", digest(spare).hex()[:32], "match" if digest(spare) == digest(car) else "MISMATCH")

car.record(EventRecord.from_float(9.5, "velocity", 0.0))
print("after a 5 s quiet spell the window holds", len(car), "events:", [r.kind.name.lower() for r in car])

for kinds, levels, slots in [(2, 4, 3), (6, 16, 10)]:
    print(f"guess space {kinds} kinds x {levels} levels over {slots} slots: {guess_space_size(kinds, levels, slots)}")
