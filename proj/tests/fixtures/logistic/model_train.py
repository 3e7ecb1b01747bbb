import csv
import sys
import tensorflow.compat.v1 as tf
tf.disable_v2_behavior()

data_dir = sys.argv[1] if len(sys.argv) > 1 else '.'
def read(table):
    with open(data_dir + '/' + table + '.csv', newline='') as f:
        return list(csv.DictReader(f))
target_values = {(int(r['rowID']),): float(r['v']) for r in read('targets')}
obs = sorted({(int(r['rowID']),) for r in read('observations')})
features_rows = read('features')
features_names = sorted({r['featureName'] for r in features_rows})
features_cells = {((int(r['rowID']),), r['featureName']): float(r['v']) for r in features_rows if r['v']}

features = tf.constant([[features_cells.get((o, n), 0.0) for n in features_names] for o in obs], dtype=tf.float64)
targets = tf.constant([target_values[o] for o in obs], dtype=tf.float64)
weights = tf.Variable(tf.zeros([len(features_names)], dtype=tf.float64))

product = tf.tensordot(features, weights, axes=1)
sigmoid = tf.div(tf.to_double(1), tf.add(tf.to_double(1), tf.exp(tf.negative(product))))
log_sigmoid = tf.log(sigmoid)
log_1_minus_sigmoid = tf.log(tf.subtract(tf.to_double(1), sigmoid))
objective = tf.negative(tf.reduce_sum(tf.add(tf.multiply(targets, log_sigmoid), tf.multiply(tf.subtract(tf.to_double(1), targets), log_1_minus_sigmoid)), None))

optimizer = tf.train.GradientDescentOptimizer(0.05)
train = optimizer.minimize(objective)
with tf.Session() as session:
    session.run(tf.global_variables_initializer())
    for step in range(1000):
        session.run(train)
        print("objective:", session.run(objective))
    trained = session.run([weights])

with open('import_weights.sql', 'w') as out:
    for n, v in zip(features_names, trained[0]):
        out.write("INSERT INTO weights(featureName, v) VALUES ('%s', %.17g);\n" % (n.replace("'", "''"), v))
